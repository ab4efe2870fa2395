//! Closed-form solution of a single resonant 2x2 block.
//!
//! A block couples `|m>` (resonant spin in `|0>`) and `|p>` (resonant spin in
//! `|1>`) with diagonal elements `E_m` and `E_p = E_m + delta` and off-diagonal
//! `v = -omega/2`. Amplitudes returned by the propagators are laboratory-frame
//! coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelBlock {
    e_m: f64,
    delta: f64,
    v: f64,
}

impl TwoLevelBlock {
    pub fn new(e_m: f64, delta: f64, omega_rabi: f64) -> Result<Self> {
        if !(omega_rabi.is_finite() && omega_rabi > 0.0) {
            return invalid(format!("Rabi frequency must be positive, got {omega_rabi}"));
        }
        if !e_m.is_finite() || !delta.is_finite() {
            return invalid("block energies must be finite");
        }
        Ok(Self {
            e_m,
            delta,
            v: -0.5 * omega_rabi,
        })
    }

    pub fn e_m(&self) -> f64 {
        self.e_m
    }

    pub fn e_p(&self) -> f64 {
        self.e_m + self.delta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn coupling(&self) -> f64 {
        self.v
    }

    pub fn omega_rabi(&self) -> f64 {
        -2.0 * self.v
    }

    /// `sqrt(omega^2 + delta^2)`.
    pub fn lambda(&self) -> f64 {
        self.omega_rabi().hypot(self.delta)
    }
}

/// Index into [`BlockEigen`]: `Lower` is the `q` level, `Upper` the `Q` level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Lower = 0,
    Upper = 1,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::Lower, Level::Upper];
}

/// Member of a block: `M` has the resonant spin in `|0>`, `P` in `|1>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    M = 0,
    P = 1,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockEigen {
    /// `[e_q, e_Q]`, ascending.
    pub energies: [f64; 2],
    /// `vectors[level] = [A_m, A_p]`, real and orthonormal.
    pub vectors: [[f64; 2]; 2],
}

impl BlockEigen {
    pub fn energy(&self, level: Level) -> f64 {
        self.energies[level as usize]
    }

    pub fn vector(&self, level: Level) -> [f64; 2] {
        self.vectors[level as usize]
    }
}

/// `lambda - delta` without cancellation when `delta >> omega`.
fn lambda_minus_delta(omega: f64, delta: f64, lambda: f64) -> f64 {
    if delta > 0.0 {
        omega * omega / (lambda + delta)
    } else {
        lambda - delta
    }
}

pub fn block_eigensystem(block: &TwoLevelBlock) -> BlockEigen {
    eigen_parts(block.e_m, block.delta, block.omega_rabi())
}

pub(crate) fn eigen_parts(e_m: f64, delta: f64, omega: f64) -> BlockEigen {
    let lambda = omega.hypot(delta);
    let gap = lambda_minus_delta(omega, delta, lambda);
    let norm = gap.hypot(omega);
    let (a, b) = (omega / norm, gap / norm);
    let centre = e_m + 0.5 * delta;
    BlockEigen {
        energies: [centre - 0.5 * lambda, centre + 0.5 * lambda],
        vectors: [[a, b], [-b, a]],
    }
}

/// Laboratory-frame amplitudes `(C_m, C_p)` after a pulse of length `tau`
/// started at `t0` with the block entirely in `start`.
pub fn propagate_block(block: &TwoLevelBlock, start: Site, t0: f64, tau: f64) -> (Complex64, Complex64) {
    let u = block_propagator(block, t0, tau);
    let col = start as usize;
    (u[0][col], u[1][col])
}

/// Laboratory-frame propagator of one block, `u[out][in]` over `(m, p)`.
pub fn block_propagator(block: &TwoLevelBlock, t0: f64, tau: f64) -> [[Complex64; 2]; 2] {
    let omega = block.omega_rabi();
    let delta = block.delta;
    let lambda = block.lambda();
    let half = 0.5 * lambda * tau;
    let (s, c) = half.sin_cos();
    let i = Complex64::i();

    let stay_m = (c + i * (delta / lambda) * s) * Complex64::cis(-0.5 * tau * delta);
    let stay_p = (c - i * (delta / lambda) * s) * Complex64::cis(0.5 * tau * delta);
    let swap = omega / lambda * s;
    let to_p = i * swap * Complex64::cis(t0 * delta + 0.5 * tau * delta);
    let to_m = i * swap * Complex64::cis(-(t0 * delta + 0.5 * tau * delta));
    [[stay_m, to_m], [to_p, stay_p]]
}

/// Probability of the detuned transition: `(omega/lambda)^2 sin^2(lambda tau / 2)`.
pub fn epsilon(omega_rabi: f64, delta: f64, tau: f64) -> f64 {
    let lambda = omega_rabi.hypot(delta);
    let s = (0.5 * lambda * tau).sin();
    (omega_rabi / lambda).powi(2) * s * s
}

/// Rabi frequency for which a detuned block completes `k` full cycles during a
/// resonant pi-pulse: `|delta| / sqrt(4k^2 - 1)`.
pub fn rabi_2pik(delta: f64, k: u32) -> Result<f64> {
    if k == 0 {
        return invalid("2pi-k index must be at least 1");
    }
    if delta == 0.0 || !delta.is_finite() {
        return invalid(format!("2pi-k rule needs a finite non-zero detuning, got {delta}"));
    }
    let k = f64::from(k);
    Ok(delta.abs() / (4.0 * k * k - 1.0).sqrt())
}

/// Duration of a resonant pi-pulse.
pub fn pi_duration(omega_rabi: f64) -> f64 {
    PI / omega_rabi
}

pub fn half_pi_duration(omega_rabi: f64) -> f64 {
    0.5 * PI / omega_rabi
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c_close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn resonant_block_is_equal_superposition() {
        let eig = block_eigensystem(&TwoLevelBlock::new(3.0, 0.0, 0.8).unwrap());
        let lo = eig.vector(Level::Lower);
        let hi = eig.vector(Level::Upper);
        assert!((lo[0] - FRAC_1_SQRT_2).abs() < 1e-15 && (lo[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((hi[0] + FRAC_1_SQRT_2).abs() < 1e-15 && (hi[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((eig.energy(Level::Upper) - eig.energy(Level::Lower) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn weak_drive_admixture() {
        let eig = block_eigensystem(&TwoLevelBlock::new(0.0, 2.0, 0.01).unwrap());
        let lo = eig.vector(Level::Lower);
        // lower level sits on |m>, admixture of |p> is omega/(2 delta)
        assert!((lo[0] - 1.0).abs() < 1e-5);
        assert!((lo[1] - 0.0025).abs() < 1e-7);
        let hi = eig.vector(Level::Upper);
        assert!((hi[1] - 1.0).abs() < 1e-5);
        assert!((hi[0] + 0.0025).abs() < 1e-7);
    }

    #[test]
    fn eigenvalues_against_characteristic_polynomial() {
        let e_m = -1.25;
        let block = TwoLevelBlock::new(e_m, 4.0, 3.0).unwrap();
        let eig = block_eigensystem(&block);
        // trace/determinant route
        let (a, d, b) = (e_m, e_m + 4.0, -1.5);
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr - 4.0 * det).sqrt();
        assert!((eig.energies[0] - 0.5 * (tr - disc)).abs() < 1e-13);
        assert!((eig.energies[1] - 0.5 * (tr + disc)).abs() < 1e-13);
        assert!((eig.energies[0] - (e_m + 2.0 - 2.5)).abs() < 1e-13);
        assert!((eig.energies[1] - (e_m + 2.0 + 2.5)).abs() < 1e-13);
        for level in Level::BOTH {
            let [x, y] = eig.vector(level);
            let e = eig.energy(level);
            assert!((a * x + b * y - e * x).abs() < 1e-13);
            assert!((b * x + d * y - e * y).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvectors_orthonormal_for_negative_detuning() {
        let eig = block_eigensystem(&TwoLevelBlock::new(0.0, -7.0, 0.3).unwrap());
        let [a, b] = eig.vector(Level::Lower);
        let [c, d] = eig.vector(Level::Upper);
        assert!((a * a + b * b - 1.0).abs() < 1e-15);
        assert!((a * c + b * d).abs() < 1e-15);
        // lower level is now mostly |p>
        assert!(b.abs() > 0.99);
    }

    #[test]
    fn resonant_pi_pulse_transfers_population() {
        let omega = 0.7;
        let block = TwoLevelBlock::new(0.0, 0.0, omega).unwrap();
        let (cm, cp) = propagate_block(&block, Site::M, 12.3, pi_duration(omega));
        assert!(c_close(cm, Complex64::new(0.0, 0.0), 1e-15));
        assert!(c_close(cp, Complex64::i(), 1e-15));
    }

    #[test]
    fn zero_duration_is_identity() {
        let block = TwoLevelBlock::new(5.0, 1.3, 0.4).unwrap();
        let (cm, cp) = propagate_block(&block, Site::M, 3.0, 0.0);
        assert_eq!(cm, Complex64::new(1.0, 0.0));
        assert_eq!(cp.norm(), 0.0);
        let (cm, cp) = propagate_block(&block, Site::P, 3.0, 0.0);
        assert_eq!(cm.norm(), 0.0);
        assert_eq!(cp, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn start_from_p_mirrors_start_from_m() {
        let t0 = 0.9;
        let tau = 2.2;
        let a = TwoLevelBlock::new(0.0, 1.7, 0.6).unwrap();
        let b = TwoLevelBlock::new(0.0, -1.7, 0.6).unwrap();
        let (cm, cp) = propagate_block(&a, Site::P, t0, tau);
        let (dm, dp) = propagate_block(&b, Site::M, t0, tau);
        assert!(c_close(cp, dm, 1e-15));
        assert!(c_close(cm, dp, 1e-15));
    }

    #[test]
    fn epsilon_examples() {
        let omega = 2.0 / 3f64.sqrt();
        assert!(epsilon(omega, 2.0, PI / omega) < 1e-30);
        assert!((epsilon(0.37, 0.0, PI / 0.37) - 1.0).abs() < 1e-15);
        let expected = 0.2 * (5f64.sqrt() * PI / 2.0).sin().powi(2);
        assert!((epsilon(1.0, 2.0, PI) - expected).abs() < 1e-15);
        let block = TwoLevelBlock::new(0.0, 2.0, 1.0).unwrap();
        let (_, cp) = propagate_block(&block, Site::M, 0.0, PI);
        assert!((cp.norm_sqr() - expected).abs() < 1e-15);
    }

    #[test]
    fn rabi_2pik_examples() {
        assert!((rabi_2pik(2.0, 1).unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((rabi_2pik(2.0, 5).unwrap() - 2.0 / 99f64.sqrt()).abs() < 1e-15);
        assert!((rabi_2pik(4.0, 1).unwrap() - 4.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((rabi_2pik(-4.0, 1).unwrap() - 4.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(rabi_2pik(2.0, 0).is_err());
        assert!(rabi_2pik(0.0, 3).is_err());
    }

    #[test]
    fn rejects_non_positive_rabi_frequency() {
        assert!(TwoLevelBlock::new(0.0, 1.0, 0.0).is_err());
        assert!(TwoLevelBlock::new(0.0, 1.0, -1.0).is_err());
    }
}
