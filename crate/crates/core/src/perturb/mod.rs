//! Error estimates for the entanglement protocol.
//!
//! The closed-form estimator treats every pulse as independent: the
//! near-resonant branch contributes `epsilon_n`, the far-off-resonance spins
//! contribute `mu_n`, and the products over pulses are combined into a single
//! probability. The state-vector engine built on first-order eigenvectors lives
//! in [`improved`].

pub mod improved;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::SpinSystem;
use crate::protocol::ProtocolPlan;
use crate::twolevel::epsilon;

pub use improved::{expanded_eigenstate, ExpandedEigenstate, ImprovedEngine, ImprovedRun, DEFAULT_TRUNCATION_FLOOR};

/// `(omega / (2 delta_omega))^2`, the admixture of an adjacent spin.
pub fn mu_unit(omega_rabi: f64, delta_omega: f64) -> f64 {
    (omega_rabi / (2.0 * delta_omega)).powi(2)
}

/// Probability of flipping spin `k_other` with a pulse tuned to `k_res`.
pub fn nonresonant_probability(k_res: usize, k_other: usize, omega_rabi: f64, delta_omega: f64) -> Result<f64> {
    if k_res == k_other {
        return invalid(format!("spin {k_res} is the resonant spin"));
    }
    let d = k_res.abs_diff(k_other) as f64;
    Ok(mu_unit(omega_rabi, delta_omega) / (d * d))
}

/// Partial sums `sum_{j=1}^{n} 1/j^2`, indexed by `n`.
#[derive(Clone, Debug)]
pub struct InverseSquareSums(Vec<f64>);

impl InverseSquareSums {
    pub fn new(max: usize) -> Self {
        let mut sums = Vec::with_capacity(max + 1);
        let mut acc = 0.0;
        sums.push(0.0);
        for j in 1..=max {
            acc += 1.0 / (j as f64 * j as f64);
            sums.push(acc);
        }
        Self(sums)
    }

    pub fn get(&self, n: usize) -> f64 {
        self.0[n]
    }

    /// `sum_{k' != k} 1/(k - k')^2` over a chain of `len` spins.
    pub fn chain_sum(&self, len: usize, k: usize) -> f64 {
        self.get(k) + self.get(len - 1 - k)
    }
}

/// Total non-resonant probability of one pulse, summed over all other spins.
pub fn mu_for_pulse(system: &SpinSystem, k_res: usize, omega_rabi: f64) -> Result<f64> {
    let len = system.len();
    if k_res >= len {
        return invalid(format!("spin index {k_res} out of range for {len} spins"));
    }
    let sums = InverseSquareSums::new(len);
    Ok(mu_unit(omega_rabi, system.delta_omega()) * sums.chain_sum(len, k_res))
}

/// `P = 1 - 1/2 prod(1 - mu_n) - 1/2 prod(1 - mu_n - epsilon_n)`, evaluated
/// through logarithms so that small `P` keeps its relative precision.
pub fn total_error(per_pulse: &[(f64, f64)]) -> Result<f64> {
    let mut log_a = 0.0;
    let mut log_b = 0.0;
    for (n, &(eps, mu)) in per_pulse.iter().enumerate() {
        if !(eps >= 0.0 && mu >= 0.0) {
            return invalid(format!("pulse {}: probabilities must be non-negative", n + 1));
        }
        if eps + mu > 1.0 {
            return invalid(format!("pulse {}: epsilon + mu = {} exceeds 1", n + 1, eps + mu));
        }
        log_a += (-mu).ln_1p();
        log_b += (-mu - eps).ln_1p();
    }
    Ok((-0.5 * log_a.exp_m1() - 0.5 * log_b.exp_m1()).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseError {
    pub index: usize,
    pub spin: usize,
    pub epsilon: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub per_pulse: Vec<PulseError>,
    pub total_p: f64,
    pub mu_unit: f64,
}

impl ErrorBudget {
    /// Near-resonant part only (`mu = 0`).
    pub fn near_resonant_p(&self) -> Result<f64> {
        let pairs: Vec<(f64, f64)> = self.per_pulse.iter().map(|p| (p.epsilon, 0.0)).collect();
        total_error(&pairs)
    }
}

/// Per-pulse `epsilon_n`, `mu_n` and the total for a generated plan. The first
/// pulse acts on the ground branch on purpose and carries `epsilon_1 = 0`.
pub fn error_budget(plan: &ProtocolPlan) -> Result<ErrorBudget> {
    let system = &plan.system;
    let len = system.len();
    let sums = InverseSquareSums::new(len);
    let per_pulse: Vec<PulseError> = plan
        .pulses
        .iter()
        .map(|p| {
            let omega = p.pulse.omega_rabi;
            let eps = if p.index == 1 {
                0.0
            } else {
                epsilon(omega, p.bystander_detuning, p.pulse.tau)
            };
            PulseError {
                index: p.index,
                spin: p.spin,
                epsilon: eps,
                mu: mu_unit(omega, system.delta_omega()) * sums.chain_sum(len, p.spin),
            }
        })
        .collect();
    let pairs: Vec<(f64, f64)> = per_pulse.iter().map(|p| (p.epsilon, p.mu)).collect();
    Ok(ErrorBudget {
        total_p: total_error(&pairs)?,
        mu_unit: mu_unit(plan.omega_rabi, system.delta_omega()),
        per_pulse,
    })
}
