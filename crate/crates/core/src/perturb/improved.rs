//! Sparse propagation with first-order eigenvectors and second-order energies.
//!
//! Under a pulse tuned near spin `k`, the Hamiltonian splits into 2x2 blocks
//! `{m, m + flip k}`. Each block is diagonalized exactly; the coupling `v` to
//! the block reached by flipping one more spin `k'` is treated to first order in
//! the eigenvectors and to second order in the energies. Only neighbours whose
//! admixture can still deposit probability above the truncation floor are
//! kept, walking outward from `k` on both sides.
//!
//! Block energies are measured from the diagonal element of `m`, which keeps
//! every quantity of order `delta_omega * L` even when the absolute energies
//! are many orders larger.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AmplitudeMap, BasisState, Frame, Pulse, SpinSystem};
use crate::twolevel::{eigen_parts, BlockEigen, Level};

pub const DEFAULT_TRUNCATION_FLOOR: f64 = 1e-14;
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 22;
/// Smallest accepted level gap, as a fraction of `delta_omega`.
pub const DEGENERACY_FRACTION: f64 = 1e-6;

/// A neighbouring block reached by flipping spin `spin` in both members.
#[derive(Clone, Debug)]
struct Neighbour {
    spin: usize,
    /// Diagonal of `m'` relative to `m`.
    offset: f64,
    /// Detuning of the neighbour block, `E_{p'} - E_{m'}`.
    detuning: f64,
    eig: BlockEigen,
    /// `coupling[s][s']` between anchor level `s` and neighbour level `s'`.
    coupling: [[f64; 2]; 2],
    /// First-order admixture `coupling / (e_s - e_s')`.
    admixture: [[f64; 2]; 2],
}

impl Neighbour {
    fn energy(&self, level: usize) -> f64 {
        self.offset + self.eig.energies[level]
    }

    fn max_admixture_sqr(&self) -> f64 {
        self.admixture.iter().flatten().fold(0.0f64, |m, c| m.max(c * c))
    }
}

/// A 2x2 block together with its perturbative surroundings.
#[derive(Clone, Debug)]
struct Expansion {
    m: BasisState,
    resonant: usize,
    delta: f64,
    eig: BlockEigen,
    neighbours: Vec<Neighbour>,
    energy2: [f64; 2],
    norm2: [f64; 2],
}

struct Context<'a> {
    system: &'a SpinSystem,
    nu: f64,
    coupling: f64,
    gap_floor: f64,
}

impl Context<'_> {
    fn new<'a>(system: &'a SpinSystem, pulse: &Pulse) -> Context<'a> {
        Context {
            system,
            nu: pulse.nu,
            coupling: pulse.coupling(),
            gap_floor: DEGENERACY_FRACTION * system.delta_omega(),
        }
    }

    fn omega(&self) -> f64 {
        -2.0 * self.coupling
    }

    fn anchor(&self, m: BasisState, resonant: usize) -> Expansion {
        let delta = self.system.effective_flip(&m, resonant, self.nu);
        let eig = eigen_parts(0.0, delta, self.omega());
        Expansion {
            m,
            resonant,
            delta,
            eig,
            neighbours: Vec::new(),
            energy2: eig.energies,
            norm2: [1.0, 1.0],
        }
    }

    fn neighbour(&self, anchor: &Expansion, spin: usize) -> Result<Neighbour> {
        let offset = self.system.effective_flip(&anchor.m, spin, self.nu);
        let m2 = anchor.m.toggled(spin);
        let detuning = self.system.effective_flip(&m2, anchor.resonant, self.nu);
        let eig = eigen_parts(0.0, detuning, self.omega());
        let mut coupling = [[0.0; 2]; 2];
        let mut admixture = [[0.0; 2]; 2];
        for s in 0..2 {
            let u = anchor.eig.vectors[s];
            for t in 0..2 {
                let w = eig.vectors[t];
                let gap = anchor.eig.energies[s] - (offset + eig.energies[t]);
                if gap.abs() < self.gap_floor {
                    return Err(Error::Degeneracy {
                        gap: gap.abs(),
                        floor: self.gap_floor,
                        resonant: anchor.resonant,
                        neighbour: spin,
                    });
                }
                let v = self.coupling * (u[0] * w[0] + u[1] * w[1]);
                coupling[s][t] = v;
                admixture[s][t] = v / gap;
            }
        }
        Ok(Neighbour {
            spin,
            offset,
            detuning,
            eig,
            coupling,
            admixture,
        })
    }

    /// Adds neighbours outward from the resonant spin. With `cutoff`, a side
    /// stops at the first neighbour whose admixture falls below it.
    fn expand(&self, anchor: &mut Expansion, cutoff: Option<f64>) -> Result<()> {
        let len = self.system.len();
        let k = anchor.resonant;
        let mut lower = Vec::new();
        for spin in (0..k).rev() {
            let n = self.neighbour(anchor, spin)?;
            if cutoff.is_some_and(|c| n.max_admixture_sqr() < c) {
                break;
            }
            lower.push(n);
        }
        let mut upper = Vec::new();
        for spin in k + 1..len {
            let n = self.neighbour(anchor, spin)?;
            if cutoff.is_some_and(|c| n.max_admixture_sqr() < c) {
                break;
            }
            upper.push(n);
        }
        lower.reverse();
        lower.extend(upper);
        anchor.neighbours = lower;
        for s in 0..2 {
            let mut shift = 0.0;
            let mut weight = 1.0;
            for n in &anchor.neighbours {
                for t in 0..2 {
                    shift += n.coupling[s][t] * n.admixture[s][t];
                    weight += n.admixture[s][t] * n.admixture[s][t];
                }
            }
            anchor.energy2[s] = anchor.eig.energies[s] + shift;
            anchor.norm2[s] = 1.0 / weight;
        }
        Ok(())
    }
}

/// Block eigenstate dressed by first-order admixtures of the neighbouring
/// blocks, renormalized to unit length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandedEigenstate {
    /// Block member with the resonant spin in `|0>`.
    pub block: BasisState,
    pub resonant: usize,
    pub level: Level,
    /// At most `2L` entries: the two block members and two states per neighbour.
    pub coefficients: Vec<(BasisState, f64)>,
    /// Energies relative to the ground-state diagonal element.
    pub energy0: f64,
    pub energy2: f64,
}

/// Dresses the block of `member` under `pulse` with every single
/// non-resonant flip.
pub fn expanded_eigenstate(system: &SpinSystem, pulse: &Pulse, member: &BasisState, level: Level) -> Result<ExpandedEigenstate> {
    pulse.validate()?;
    let resonant = system.resonant_spin(pulse.nu);
    let ctx = Context::new(system, pulse);
    let m = member.with_spin(resonant, false);
    let mut anchor = ctx.anchor(m.clone(), resonant);
    ctx.expand(&mut anchor, None)?;
    let s = level as usize;
    let norm = anchor.norm2[s].sqrt();
    let u = anchor.eig.vectors[s];
    let p = m.toggled(resonant);
    let mut coefficients = vec![(m.clone(), norm * u[0]), (p, norm * u[1])];
    for n in &anchor.neighbours {
        let mut y = [0.0; 2];
        for t in 0..2 {
            let w = n.eig.vectors[t];
            y[0] += n.admixture[s][t] * w[0];
            y[1] += n.admixture[s][t] * w[1];
        }
        let m2 = m.toggled(n.spin);
        let p2 = m2.toggled(resonant);
        coefficients.push((m2, norm * y[0]));
        coefficients.push((p2, norm * y[1]));
    }
    let base = system.effective_offset(&m, pulse.nu);
    Ok(ExpandedEigenstate {
        block: m,
        resonant,
        level,
        coefficients,
        energy0: base + anchor.eig.energies[s],
        energy2: base + anchor.energy2[s],
    })
}

/// Statistics of one engine run.
#[derive(Clone, Debug)]
pub struct ImprovedRun {
    pub final_state: AmplitudeMap,
    /// Probability dropped by truncation, summed over pulses.
    pub pruned_mass: f64,
    pub max_support: usize,
    pub pulses: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImprovedEngine {
    pub truncation_floor: f64,
    pub support_cap: usize,
    /// Without neighbours every block evolves as an isolated two-level system.
    pub neighbours: bool,
}

impl Default for ImprovedEngine {
    fn default() -> Self {
        Self {
            truncation_floor: DEFAULT_TRUNCATION_FLOOR,
            support_cap: DEFAULT_SUPPORT_CAP,
            neighbours: true,
        }
    }
}

impl ImprovedEngine {
    pub fn with_floor(truncation_floor: f64) -> Self {
        Self {
            truncation_floor,
            ..Self::default()
        }
    }

    /// Independent 2x2 blocks only.
    pub fn two_level() -> Self {
        Self {
            neighbours: false,
            ..Self::default()
        }
    }

    /// Applies one pulse starting at `t0`. Returns the new state and the
    /// probability removed by truncation.
    pub fn propagate(&self, state: &AmplitudeMap, system: &SpinSystem, pulse: &Pulse, t0: f64) -> Result<(AmplitudeMap, f64)> {
        state.check_lab(system.len())?;
        pulse.validate()?;
        if pulse.tau == 0.0 {
            let mut out = state.clone();
            let pruned = out.prune(self.truncation_floor);
            return Ok((out, pruned));
        }
        let ctx = Context::new(system, pulse);
        let k = system.resonant_spin(pulse.nu);

        let mut blocks: BTreeMap<BasisState, [Complex64; 2]> = BTreeMap::new();
        for (x, &a) in state.iter() {
            let site = usize::from(x.is_flipped(k));
            blocks.entry(x.with_spin(k, false)).or_default()[site] += a;
        }

        let mut out = AmplitudeMap::new(system.len(), Frame::Laboratory);
        for (m, c) in blocks {
            let mut anchor = ctx.anchor(m, k);
            let weight = c[0].norm_sqr() + c[1].norm_sqr();
            if self.neighbours && weight > 0.0 {
                ctx.expand(&mut anchor, Some(self.truncation_floor / (4.0 * weight)))?;
            }
            evolve_block(&anchor, c, pulse, t0, &mut out);
        }
        let pruned = out.prune(self.truncation_floor);
        if out.support() > self.support_cap {
            return Err(Error::SupportOverflow {
                support: out.support(),
                cap: self.support_cap,
            });
        }
        Ok((out, pruned))
    }

    pub fn run_protocol(&self, system: &SpinSystem, pulses: &[Pulse], initial: &AmplitudeMap) -> Result<ImprovedRun> {
        initial.check_lab(system.len())?;
        let mut state = initial.clone();
        let mut t = 0.0;
        let mut pruned_mass = 0.0;
        let mut max_support = state.support();
        for pulse in pulses {
            let (next, pruned) = self.propagate(&state, system, pulse, t)?;
            state = next;
            pruned_mass += pruned;
            max_support = max_support.max(state.support());
            t += pulse.tau;
        }
        Ok(ImprovedRun {
            final_state: state,
            pruned_mass,
            max_support,
            pulses: pulses.len(),
        })
    }
}

/// Free function form of [`ImprovedEngine::propagate`].
pub fn improved_propagate(
    state: &AmplitudeMap,
    system: &SpinSystem,
    pulse: &Pulse,
    t0: f64,
    truncation_floor: f64,
) -> Result<(AmplitudeMap, f64)> {
    ImprovedEngine::with_floor(truncation_floor).propagate(state, system, pulse, t0)
}

/// Propagates the laboratory amplitudes `(c_m, c_p)` of one block and adds the
/// results, including the spill into neighbour blocks, to `out`.
fn evolve_block(anchor: &Expansion, c: [Complex64; 2], pulse: &Pulse, t0: f64, out: &mut AmplitudeMap) {
    let tau = pulse.tau;
    let t1 = t0 + tau;
    let phi = pulse.phi;
    let delta = anchor.delta;
    let k = anchor.resonant;

    // laboratory -> rotating relative to E_m; phase factors count flips relative to m
    let a = [c[0], c[1] * Complex64::cis(-delta * t0 + phi)];

    let mut beta = [Complex64::default(); 2];
    let mut phased = [Complex64::default(); 2];
    for s in 0..2 {
        let u = anchor.eig.vectors[s];
        beta[s] = u[0] * a[0] + u[1] * a[1];
        phased[s] = anchor.norm2[s] * beta[s] * Complex64::cis(-anchor.energy2[s] * tau);
    }
    let mut own = [Complex64::default(); 2];
    for s in 0..2 {
        let u = anchor.eig.vectors[s];
        own[0] += phased[s] * u[0];
        own[1] += phased[s] * u[1];
    }

    for n in &anchor.neighbours {
        let mut spill = [Complex64::default(); 2];
        for t in 0..2 {
            // component of the input along the neighbour level's image in the block
            let mut w = [0.0; 2];
            for s in 0..2 {
                let u = anchor.eig.vectors[s];
                w[0] -= n.admixture[s][t] * u[0];
                w[1] -= n.admixture[s][t] * u[1];
            }
            let proj = w[0] * a[0] + w[1] * a[1];
            let rot = Complex64::cis(-n.energy(t) * tau);
            own[0] += rot * proj * w[0];
            own[1] += rot * proj * w[1];
            let amp = n.admixture[0][t] * phased[0] + n.admixture[1][t] * phased[1] + rot * proj;
            let v = n.eig.vectors[t];
            spill[0] += amp * v[0];
            spill[1] += amp * v[1];
        }
        let m2 = anchor.m.toggled(n.spin);
        let dn = if anchor.m.is_flipped(n.spin) { -1.0 } else { 1.0 };
        let p2 = m2.toggled(k);
        out.add(p2, spill[1] * Complex64::cis((n.offset + n.detuning) * t1 - phi * (dn + 1.0)));
        out.add(m2, spill[0] * Complex64::cis(n.offset * t1 - phi * dn));
    }

    let p = anchor.m.toggled(k);
    out.add(p, own[1] * Complex64::cis(delta * t1 - phi));
    out.add(anchor.m.clone(), own[0]);
}
