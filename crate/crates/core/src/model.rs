//! Spin chain, basis states, pulses and the diagonal energy bookkeeping shared
//! by every engine.
//!
//! All frequencies are in units of the Ising constant `J`, times in units of
//! `1/J`. Spin `k` carries the Larmor frequency `omega0 + k * delta_omega`;
//! `|0>` is spin-up (`sigma = +1`) and `|1>` is spin-down (`sigma = -1`).
//! Bit strings are printed with spin `L-1` on the left and spin `0` on the
//! right.

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Result};

/// Ising coupling. Everything else is measured in units of it.
pub const ISING_J: f64 = 1.0;

pub const DEFAULT_OMEGA0: f64 = 100.0;

/// Chains up to this length store basis states as a machine word.
pub const WORD_SPINS: usize = 62;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    len: usize,
    omega0: f64,
    delta_omega: f64,
}

impl SpinSystem {
    pub fn new(len: usize, omega0: f64, delta_omega: f64) -> Result<Self> {
        if len == 0 {
            return invalid("chain length must be at least 1");
        }
        if len > u32::MAX as usize {
            return invalid(format!("chain length {len} is too large"));
        }
        if !omega0.is_finite() {
            return invalid("omega0 must be finite");
        }
        if !(delta_omega.is_finite() && delta_omega > 0.0) {
            return invalid(format!("delta_omega must be positive, got {delta_omega}"));
        }
        Ok(Self { len, omega0, delta_omega })
    }

    /// Chain with the default base Larmor frequency.
    pub fn with_spacing(len: usize, delta_omega: f64) -> Result<Self> {
        Self::new(len, DEFAULT_OMEGA0, delta_omega)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    pub fn larmor(&self, k: usize) -> f64 {
        self.omega0 + k as f64 * self.delta_omega
    }

    pub fn ground(&self) -> BasisState {
        BasisState::ground(self.len)
    }

    fn check_state(&self, state: &BasisState) -> Result<()> {
        if state.len() != self.len {
            return invalid(format!("basis state has {} spins, system has {}", state.len(), self.len));
        }
        Ok(())
    }

    fn check_spin(&self, k: usize) -> Result<()> {
        if k >= self.len {
            return invalid(format!("spin index {k} out of range for {} spins", self.len));
        }
        Ok(())
    }

    /// Eigenvalue of the static Hamiltonian for a basis state:
    /// `E = -1/2 sum_k omega_k sigma_k - J/2 sum_k sigma_k sigma_{k+1}` on an open chain.
    pub fn energy(&self, state: &BasisState) -> Result<f64> {
        self.check_state(state)?;
        let mut zeeman = 0.0;
        let mut ising = 0.0;
        for k in 0..self.len {
            let s = state.sigma(k);
            zeeman += self.larmor(k) * s;
            if k + 1 < self.len {
                ising += s * state.sigma(k + 1);
            }
        }
        Ok(-0.5 * zeeman - 0.5 * ISING_J * ising)
    }

    /// Rotating-frame shift `chi = -(nu/2) sum_k sigma_k`.
    pub fn rotating_shift(&self, state: &BasisState, nu: f64) -> Result<f64> {
        self.check_state(state)?;
        Ok(-0.5 * nu * state.magnetization())
    }

    /// Diagonal element `E - chi` of the rotating-frame Hamiltonian.
    pub fn effective_diagonal(&self, state: &BasisState, nu: f64) -> Result<f64> {
        Ok(self.energy(state)? - self.rotating_shift(state, nu)?)
    }

    /// `E(state) - E(ground)` evaluated from the flipped spins and domain walls
    /// only, so it stays accurate when the absolute energies are huge.
    pub fn energy_offset(&self, state: &BasisState) -> f64 {
        self.effective_offset(state, 0.0)
    }

    /// Rotating-frame diagonal relative to the ground state,
    /// `sum_{flipped k} (omega_k - nu) + J * (number of domain walls)`.
    pub fn effective_offset(&self, state: &BasisState, nu: f64) -> f64 {
        let mut offset = 0.0;
        let mut walls = 0usize;
        for k in state.flipped_spins() {
            offset += self.larmor(k) - nu;
            if k > 0 && !state.is_flipped(k - 1) {
                walls += 1;
            }
            if k + 1 < self.len && !state.is_flipped(k + 1) {
                walls += 1;
            }
        }
        offset + ISING_J * walls as f64
    }

    fn neighbour_field(&self, state: &BasisState, k: usize) -> f64 {
        let mut field = 0.0;
        if k > 0 {
            field += state.sigma(k - 1);
        }
        if k + 1 < self.len {
            field += state.sigma(k + 1);
        }
        field
    }

    /// Frequency of the `|0> -> |1>` transition of spin `k` given the current
    /// orientation of its neighbours: `omega_k + J * (sigma_{k-1} + sigma_{k+1})`.
    /// Independent of the orientation of spin `k` itself.
    pub fn transition_frequency(&self, state: &BasisState, k: usize) -> f64 {
        self.larmor(k) + ISING_J * self.neighbour_field(state, k)
    }

    /// `E(state with spin k flipped) - E(state)`. Positive when spin `k` goes
    /// from `|0>` to `|1>`; changes sign when applied to the flipped state.
    pub fn resonance_frequency(&self, state: &BasisState, k: usize) -> Result<f64> {
        self.check_state(state)?;
        self.check_spin(k)?;
        Ok(self.flip_energy(state, k))
    }

    pub(crate) fn flip_energy(&self, state: &BasisState, k: usize) -> f64 {
        state.sigma(k) * self.transition_frequency(state, k)
    }

    /// Change of the rotating-frame diagonal when spin `k` is flipped.
    pub(crate) fn effective_flip(&self, state: &BasisState, k: usize, nu: f64) -> f64 {
        state.sigma(k) * (self.transition_frequency(state, k) - nu)
    }

    /// Spin whose Larmor frequency lies closest to `nu`.
    pub fn resonant_spin(&self, nu: f64) -> usize {
        let x = ((nu - self.omega0) / self.delta_omega).round();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.len - 1)
        }
    }
}

/// Computational basis state of an `L`-spin chain.
///
/// Chains of at most [`WORD_SPINS`] spins use a bit pattern (bit `k` set
/// means spin `k` is in `|1>`); longer chains store the sorted set of flipped
/// spins. The representation is canonical for a given length, so equality,
/// hashing and ordering are consistent. For word-sized chains the ordering is
/// the natural binary order of the index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    len: u32,
    spins: Spins,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Spins {
    Word(u64),
    Flipped(SmallVec<[u32; 6]>),
}

impl BasisState {
    pub fn ground(len: usize) -> Self {
        let spins = if len <= WORD_SPINS {
            Spins::Word(0)
        } else {
            Spins::Flipped(SmallVec::new())
        };
        Self { len: len as u32, spins }
    }

    pub fn from_index(len: usize, index: u64) -> Result<Self> {
        if len > WORD_SPINS {
            return invalid(format!("index form needs at most {WORD_SPINS} spins, got {len}"));
        }
        if len < 64 && index >> len != 0 {
            return invalid(format!("index {index} out of range for {len} spins"));
        }
        Ok(Self {
            len: len as u32,
            spins: Spins::Word(index),
        })
    }

    pub fn from_flipped<I: IntoIterator<Item = usize>>(len: usize, flipped: I) -> Result<Self> {
        let mut state = Self::ground(len);
        for k in flipped {
            if k >= len {
                return invalid(format!("spin {k} out of range for {len} spins"));
            }
            if state.is_flipped(k) {
                return invalid(format!("spin {k} listed twice"));
            }
            state = state.toggled(k);
        }
        Ok(state)
    }

    /// Parses a bit string written with spin `L-1` first, e.g. `"10001"`.
    pub fn parse_bits(bits: &str) -> Result<Self> {
        let len = bits.chars().count();
        if len == 0 {
            return invalid("empty bit string");
        }
        let mut flipped = Vec::new();
        for (pos, c) in bits.chars().enumerate() {
            match c {
                '0' => {}
                '1' => flipped.push(len - 1 - pos),
                other => return invalid(format!("unexpected character {other:?} in bit string")),
            }
        }
        Self::from_flipped(len, flipped)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self) -> Option<u64> {
        match self.spins {
            Spins::Word(bits) => Some(bits),
            Spins::Flipped(_) => None,
        }
    }

    pub fn is_flipped(&self, k: usize) -> bool {
        debug_assert!(k < self.len());
        match &self.spins {
            Spins::Word(bits) => (bits >> k) & 1 == 1,
            Spins::Flipped(set) => set.binary_search(&(k as u32)).is_ok(),
        }
    }

    /// `+1` for `|0>`, `-1` for `|1>`.
    pub fn sigma(&self, k: usize) -> f64 {
        if self.is_flipped(k) {
            -1.0
        } else {
            1.0
        }
    }

    pub fn toggled(&self, k: usize) -> Self {
        debug_assert!(k < self.len());
        let spins = match &self.spins {
            Spins::Word(bits) => Spins::Word(bits ^ (1 << k)),
            Spins::Flipped(set) => {
                let mut set = set.clone();
                match set.binary_search(&(k as u32)) {
                    Ok(pos) => {
                        set.remove(pos);
                    }
                    Err(pos) => set.insert(pos, k as u32),
                }
                Spins::Flipped(set)
            }
        };
        Self { len: self.len, spins }
    }

    /// Copy with spin `k` forced to `|1>` (`flipped = true`) or `|0>`.
    pub fn with_spin(&self, k: usize, flipped: bool) -> Self {
        if self.is_flipped(k) == flipped {
            self.clone()
        } else {
            self.toggled(k)
        }
    }

    /// Flipped spins in ascending order.
    pub fn flipped_spins(&self) -> SmallVec<[usize; 8]> {
        match &self.spins {
            Spins::Word(bits) => {
                let mut out = SmallVec::new();
                let mut rest = *bits;
                while rest != 0 {
                    out.push(rest.trailing_zeros() as usize);
                    rest &= rest - 1;
                }
                out
            }
            Spins::Flipped(set) => set.iter().map(|&k| k as usize).collect(),
        }
    }

    pub fn flip_count(&self) -> usize {
        match &self.spins {
            Spins::Word(bits) => bits.count_ones() as usize,
            Spins::Flipped(set) => set.len(),
        }
    }

    /// `sum_k sigma_k`.
    pub fn magnetization(&self) -> f64 {
        self.len() as f64 - 2.0 * self.flip_count() as f64
    }
}

impl Serialize for BasisState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BasisState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let bits = String::deserialize(deserializer)?;
        BasisState::parse_bits(&bits).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len()).rev().map(|k| if self.is_flipped(k) { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

/// One rectangular pulse. `nu` and `omega_rabi` in units of `J`, `tau` in `1/J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub nu: f64,
    pub omega_rabi: f64,
    pub tau: f64,
    #[serde(default)]
    pub phi: f64,
}

impl Pulse {
    pub fn new(nu: f64, omega_rabi: f64, tau: f64) -> Result<Self> {
        let pulse = Self {
            nu,
            omega_rabi,
            tau,
            phi: 0.0,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn with_phase(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nu.is_finite() || !self.phi.is_finite() {
            return invalid("pulse frequency and phase must be finite");
        }
        if !(self.omega_rabi.is_finite() && self.omega_rabi > 0.0) {
            return invalid(format!("Rabi frequency must be positive, got {}", self.omega_rabi));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return invalid(format!("pulse duration must be non-negative, got {}", self.tau));
        }
        Ok(())
    }

    /// Off-diagonal element of the rotating-frame Hamiltonian for `phi = 0`.
    pub fn coupling(&self) -> f64 {
        -0.5 * self.omega_rabi
    }
}

/// Which representation the amplitudes of an [`AmplitudeMap`] are in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Coefficients `C_p` of `Psi = sum_p C_p |p> exp(-i E_p t)`.
    Laboratory,
    /// Coefficients `A_p` in the frame rotating with the current pulse.
    Rotating,
}

/// Sparse wavefunction: basis state to complex amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeMap {
    len: usize,
    frame: Frame,
    entries: BTreeMap<BasisState, Complex64>,
}

impl AmplitudeMap {
    pub fn new(len: usize, frame: Frame) -> Self {
        Self {
            len,
            frame,
            entries: BTreeMap::new(),
        }
    }

    /// Laboratory-frame map holding a single basis state with amplitude one.
    pub fn basis(state: BasisState) -> Self {
        let mut map = Self::new(state.len(), Frame::Laboratory);
        map.entries.insert(state, Complex64::new(1.0, 0.0));
        map
    }

    pub fn ground(len: usize) -> Self {
        Self::basis(BasisState::ground(len))
    }

    /// Builds a map from a dense vector in natural binary order, skipping exact zeros.
    pub fn from_dense(len: usize, frame: Frame, amplitudes: &[Complex64]) -> Result<Self> {
        if len > WORD_SPINS || amplitudes.len() != 1usize << len {
            return invalid(format!("dense vector of length {} does not match {len} spins", amplitudes.len()));
        }
        let mut map = Self::new(len, frame);
        for (i, &a) in amplitudes.iter().enumerate() {
            if a != Complex64::new(0.0, 0.0) {
                map.entries.insert(BasisState::from_index(len, i as u64)?, a);
            }
        }
        Ok(map)
    }

    pub fn to_dense(&self) -> Result<Vec<Complex64>> {
        if self.len > WORD_SPINS {
            return invalid(format!("cannot densify a {}-spin state", self.len));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); 1usize << self.len];
        for (state, &a) in &self.entries {
            // Length is checked on insertion, so every key has an index.
            out[state.index().expect("word-sized state") as usize] = a;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn support(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, state: &BasisState) -> Complex64 {
        self.entries.get(state).copied().unwrap_or_default()
    }

    pub fn probability(&self, state: &BasisState) -> f64 {
        self.get(state).norm_sqr()
    }

    pub fn insert(&mut self, state: BasisState, amplitude: Complex64) -> Result<()> {
        if state.len() != self.len {
            return invalid(format!("state has {} spins, map holds {}", state.len(), self.len));
        }
        self.entries.insert(state, amplitude);
        Ok(())
    }

    pub(crate) fn add(&mut self, state: BasisState, amplitude: Complex64) {
        *self.entries.entry(state).or_default() += amplitude;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisState, &Complex64)> {
        self.entries.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.values().map(|a| a.norm_sqr()).sum()
    }

    /// Drops every entry whose probability is below `floor`; returns the removed mass.
    pub fn prune(&mut self, floor: f64) -> f64 {
        let mut removed = 0.0;
        self.entries.retain(|_, a| {
            let p = a.norm_sqr();
            if p < floor {
                removed += p;
                false
            } else {
                true
            }
        });
        removed
    }

    pub(crate) fn check_lab(&self, len: usize) -> Result<()> {
        if self.len != len {
            return invalid(format!("state has {} spins, system has {len}", self.len));
        }
        if self.frame != Frame::Laboratory {
            return invalid("engines take laboratory-frame amplitudes");
        }
        Ok(())
    }

    /// Writes `index,bits,re,im` rows (index left empty for long chains),
    /// numbers with 12 significant digits.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,bits,re,im")?;
        for (state, a) in &self.entries {
            let index = state.index().map(|i| i.to_string()).unwrap_or_default();
            writeln!(out, "{index},{state},{:.11e},{:.11e}", a.re, a.im)?;
        }
        Ok(())
    }
}
