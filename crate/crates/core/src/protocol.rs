//! Pulse sequence that entangles the two end spins of the chain.
//!
//! Starting from the ground state, a pi/2-pulse on spin `L-1` creates
//! `(|0...0> + i|10...0>)/sqrt(2)`. The following pi-pulses walk a domain of
//! flipped spins along the `|1...>` branch until it reads `|10...01>`, while the
//! ground-state branch is only ever hit off resonance.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{AmplitudeMap, BasisState, Pulse, SpinSystem, ISING_J};
use crate::twolevel::{half_pi_duration, pi_duration, rabi_2pik};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedPulse {
    /// 1-based position in the sequence.
    pub index: usize,
    pub pulse: Pulse,
    pub spin: usize,
    pub source: BasisState,
    pub target: BasisState,
    /// Detuning of the same spin on the ground-state branch, `nu_ground - nu`.
    /// Zero for the first pulse, which acts on that branch by design.
    pub bystander_detuning: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub system: SpinSystem,
    pub omega_rabi: f64,
    pub pulses: Vec<PlannedPulse>,
    /// Partner of the ground state in the ideal output.
    pub target: BasisState,
}

impl ProtocolPlan {
    pub fn pulse_list(&self) -> Vec<Pulse> {
        self.pulses.iter().map(|p| p.pulse).collect()
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// The first `n` pulses, with the target moved to the state reached after them.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.pulses.len());
        let target = match n {
            0 => self.system.ground(),
            _ => self.pulses[n - 1].target.clone(),
        };
        Self {
            system: self.system,
            omega_rabi: self.omega_rabi,
            pulses: self.pulses[..n].to_vec(),
            target,
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.pulses.iter().map(|p| p.pulse.tau).sum()
    }

    /// Fixed-width text table, one row per pulse.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>5} {:>5} {:>20} {:>14} {:>14} {:>9}  transition",
            "n", "spin", "nu", "omega", "tau", "detuning"
        );
        for p in &self.pulses {
            let _ = writeln!(
                out,
                "{:>5} {:>5} {:>20.12} {:>14.10} {:>14.10} {:>9.4}  {} -> {}",
                p.index,
                p.spin,
                p.pulse.nu,
                p.pulse.omega_rabi,
                p.pulse.tau,
                p.bystander_detuning,
                label(&p.source),
                label(&p.target)
            );
        }
        out
    }
}

fn label(state: &BasisState) -> String {
    if state.len() <= 64 {
        state.to_string()
    } else {
        let spins: Vec<String> = state.flipped_spins().iter().map(|k| k.to_string()).collect();
        format!("{{{}}}", spins.join(","))
    }
}

/// Spins flipped by the pulses, in order.
pub fn flip_sequence(len: usize) -> Vec<usize> {
    if len < 2 {
        return Vec::new();
    }
    let mut flips = vec![len - 1, len - 2];
    for j in (0..len.saturating_sub(2)).rev() {
        flips.push(j);
        flips.push(j + 1);
    }
    flips
}

/// Builds the `2L-2` pulses. With `k_2pik` set, `omega_rabi` is replaced by
/// the 2pi-k value for a detuning of `2J`.
pub fn generate_protocol(system: &SpinSystem, omega_rabi: f64, k_2pik: Option<u32>) -> Result<ProtocolPlan> {
    let len = system.len();
    if len < 3 {
        return invalid(format!("the protocol needs at least 3 spins, got {len}"));
    }
    let omega = match k_2pik {
        Some(k) => rabi_2pik(2.0 * ISING_J, k)?,
        None => omega_rabi,
    };
    if !(omega.is_finite() && omega > 0.0) {
        return invalid(format!("Rabi frequency must be positive, got {omega}"));
    }

    let ground = system.ground();
    let mut source = ground.clone();
    let mut pulses = Vec::with_capacity(2 * len - 2);
    for (i, spin) in flip_sequence(len).into_iter().enumerate() {
        let index = i + 1;
        let target = source.toggled(spin);
        let nu = system.resonance_frequency(&source, spin)?.abs();
        let (omega_n, tau) = match index {
            1 => (omega, half_pi_duration(omega)),
            4 => (2.0 * omega, pi_duration(2.0 * omega)),
            _ => (omega, pi_duration(omega)),
        };
        let bystander_detuning = if index == 1 {
            0.0
        } else {
            system.transition_frequency(&ground, spin) - nu
        };
        pulses.push(PlannedPulse {
            index,
            pulse: Pulse::new(nu, omega_n, tau)?,
            spin,
            source: source.clone(),
            target: target.clone(),
            bystander_detuning,
        });
        source = target;
    }
    Ok(ProtocolPlan {
        system: *system,
        omega_rabi: omega,
        pulses,
        target: source,
    })
}

/// Error probability and phases of a final state relative to
/// `(|0...0> + exp(i phi2) |target>) / sqrt(2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Probability outside the two ideal states.
    pub error_probability: f64,
    pub ground_probability: f64,
    pub target_probability: f64,
    pub phi1: f64,
    pub phi2: f64,
}

pub fn evaluate_outcome(final_state: &AmplitudeMap, plan: &ProtocolPlan) -> Outcome {
    evaluate_against(final_state, &plan.target)
}

/// As [`evaluate_outcome`] for an arbitrary partner state.
pub fn evaluate_against(final_state: &AmplitudeMap, target: &BasisState) -> Outcome {
    let g = final_state.get(&BasisState::ground(final_state.len()));
    let t = final_state.get(target);
    let phi1 = g.arg();
    Outcome {
        error_probability: (final_state.norm_sqr() - g.norm_sqr() - t.norm_sqr()).max(0.0),
        ground_probability: g.norm_sqr(),
        target_probability: t.norm_sqr(),
        phi1,
        phi2: wrap_phase(t.arg() - phi1),
    }
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}
