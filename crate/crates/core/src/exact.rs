//! Dense propagation of the full rotating-frame Hamiltonian.
//!
//! Basis order is the natural binary order of [`BasisState::index`]. The
//! diagonal is stored relative to the ground-state element so that large
//! Larmor frequencies do not eat into the precision of the eigenvalues.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{AmplitudeMap, BasisState, Frame, Pulse, SpinSystem};

pub const DEFAULT_EXACT_LIMIT: usize = 14;

/// Tolerance on the input norm accepted by the engines.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Rotating-frame Hamiltonian of one pulse.
///
/// Off-diagonal elements between single-flip neighbours `x`, `y` equal
/// `-omega/2 * exp(-i phi (n_x - n_y))` with `n` the number of flipped spins;
/// for `phi = 0` the matrix is real symmetric.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    len: usize,
    coupling: f64,
    phi: f64,
    reference: f64,
    diagonal: Vec<f64>,
}

impl EffectiveHamiltonian {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// `E - chi` of the ground state.
    pub fn reference(&self) -> f64 {
        self.reference
    }

    /// Diagonal elements minus [`reference`](Self::reference).
    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Element `(row, col)` with the reference included on the diagonal.
    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        if row == col {
            return Complex64::new(self.reference + self.diagonal[row], 0.0);
        }
        let diff = row ^ col;
        if diff.is_power_of_two() {
            let dn = (row.count_ones() as f64) - (col.count_ones() as f64);
            Complex64::from_polar(self.coupling, -self.phi * dn)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Number of non-zero off-diagonal elements.
    pub fn offdiagonal_count(&self) -> usize {
        if self.coupling == 0.0 {
            0
        } else {
            self.dim() * self.len
        }
    }

    /// `(H - reference) x` for the real (`phi = 0`) matrix.
    pub fn apply_shifted(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = self.diagonal[i] * x[i];
                for k in 0..self.len {
                    acc += self.coupling * x[i ^ (1 << k)];
                }
                acc
            })
            .collect()
    }

    fn shifted_real_matrix(&self) -> Mat<f64> {
        let n = self.dim();
        let mut h = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = self.diagonal[i];
            for k in 0..self.len {
                h[(i, i ^ (1 << k))] = self.coupling;
            }
        }
        h
    }
}

/// Eigenpairs of the `phi = 0` matrix with the reference removed.
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

impl Spectrum {
    /// Ascending eigenvalues relative to the ground-state diagonal element.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, j)]).collect()
    }
}

/// Outcome of a sequence of pulses.
#[derive(Clone, Debug)]
pub struct ExactRun {
    pub final_state: AmplitudeMap,
    /// `| |C_after|^2 - |C_before|^2 |` for every pulse.
    pub norm_drift: Vec<f64>,
    /// `| |C_final|^2 - |C_initial|^2 |`.
    pub cumulative_drift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactEngine {
    pub limit: usize,
}

impl Default for ExactEngine {
    fn default() -> Self {
        Self {
            limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

impl ExactEngine {
    pub fn new(limit: usize) -> Self {
        Self { limit }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.limit {
            Err(Error::Capacity { len, limit: self.limit })
        } else {
            Ok(())
        }
    }

    pub fn build_effective_hamiltonian(&self, system: &SpinSystem, pulse: &Pulse) -> Result<EffectiveHamiltonian> {
        self.check_len(system.len())?;
        pulse.validate()?;
        let len = system.len();
        let ground = system.ground();
        let reference = system.effective_diagonal(&ground, pulse.nu)?;
        let diagonal = (0..1u64 << len)
            .map(|i| {
                let state = BasisState::from_index(len, i)?;
                Ok(system.effective_offset(&state, pulse.nu))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EffectiveHamiltonian {
            len,
            coupling: pulse.coupling(),
            phi: pulse.phi,
            reference,
            diagonal,
        })
    }

    pub fn diagonalize(&self, h: &EffectiveHamiltonian) -> Result<Spectrum> {
        self.check_len(h.len)?;
        let eig = h
            .shifted_real_matrix()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
        Ok(Spectrum {
            values,
            vectors: eig.U().to_owned(),
        })
    }

    /// Applies one pulse starting at `t0` to laboratory-frame amplitudes.
    pub fn propagate_pulse(&self, state: &AmplitudeMap, system: &SpinSystem, pulse: &Pulse, t0: f64) -> Result<AmplitudeMap> {
        self.check_len(system.len())?;
        state.check_lab(system.len())?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return invalid(format!("input state is not normalized (norm^2 = {norm})"));
        }
        let h = self.build_effective_hamiltonian(system, pulse)?;
        let spectrum = self.diagonalize(&h)?;
        let c = state.to_dense()?;
        let out = self.evolve_dense(&h, &spectrum, &c, t0, pulse.tau);
        AmplitudeMap::from_dense(system.len(), Frame::Laboratory, &out)
    }

    fn evolve_dense(&self, h: &EffectiveHamiltonian, spectrum: &Spectrum, c: &[Complex64], t0: f64, tau: f64) -> Vec<Complex64> {
        let n = h.dim();
        let t1 = t0 + tau;
        let flips = |i: usize| i.count_ones() as f64;

        // laboratory -> rotating at t0, then undo the phase conjugation
        let a = Mat::<f64>::from_fn(n, 2, |i, j| {
            let z = c[i] * Complex64::cis(-h.diagonal[i] * t0 + h.phi * flips(i));
            if j == 0 {
                z.re
            } else {
                z.im
            }
        });
        let v = &spectrum.vectors;
        let mut y = v.transpose() * &a;
        for (j, &e) in spectrum.values.iter().enumerate() {
            let z = Complex64::new(y[(j, 0)], y[(j, 1)]) * Complex64::cis(-e * tau);
            y[(j, 0)] = z.re;
            y[(j, 1)] = z.im;
        }
        let b = v * &y;
        (0..n)
            .map(|i| Complex64::new(b[(i, 0)], b[(i, 1)]) * Complex64::cis(h.diagonal[i] * t1 - h.phi * flips(i)))
            .collect()
    }

    /// Applies `pulses` back to back starting at `t = 0`.
    pub fn run_protocol(&self, system: &SpinSystem, pulses: &[Pulse], initial: &AmplitudeMap) -> Result<ExactRun> {
        self.check_len(system.len())?;
        initial.check_lab(system.len())?;
        let start_norm = initial.norm_sqr();
        if (start_norm - 1.0).abs() > NORM_TOLERANCE {
            return invalid(format!("input state is not normalized (norm^2 = {start_norm})"));
        }
        let mut c = initial.to_dense()?;
        let mut t = 0.0;
        let mut norm_drift = Vec::with_capacity(pulses.len());
        for pulse in pulses {
            let h = self.build_effective_hamiltonian(system, pulse)?;
            let spectrum = self.diagonalize(&h)?;
            let before: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            c = self.evolve_dense(&h, &spectrum, &c, t, pulse.tau);
            let after: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            norm_drift.push((after - before).abs());
            t += pulse.tau;
        }
        let final_state = AmplitudeMap::from_dense(system.len(), Frame::Laboratory, &c)?;
        let cumulative_drift = (final_state.norm_sqr() - start_norm).abs();
        Ok(ExactRun {
            final_state,
            norm_drift,
            cumulative_drift,
        })
    }
}
