//! Simulation and error estimation for an Ising spin-chain quantum computer
//! driven by rectangular resonant pulses.
//!
//! * [`model`]: chain, basis states, pulses and diagonal energies.
//! * [`twolevel`]: closed-form dynamics of one resonant 2x2 block.
//! * [`exact`]: dense propagation for short chains.
//! * [`perturb`]: the closed-form error estimator and the sparse engine based
//!   on first-order eigenvectors.
//! * [`protocol`]: the pulse sequence entangling the end spins.
//! * [`sweep`]: parameter scans built on the engines.

pub mod error;
pub mod exact;
pub mod model;
pub mod perturb;
pub mod protocol;
pub mod sweep;
pub mod twolevel;

pub use error::{Error, Result};
pub use model::{AmplitudeMap, BasisState, Frame, Pulse, SpinSystem};
