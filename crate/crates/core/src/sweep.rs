//! Parameter scans over the protocol: region diagrams in the
//! `(delta_omega, omega)` plane, minimum spacing versus chain length, and
//! side-by-side engine comparisons.
//!
//! Points are evaluated in parallel; results always come back in grid order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::ExactEngine;
use crate::model::{AmplitudeMap, SpinSystem, DEFAULT_OMEGA0, ISING_J};
use crate::perturb::{error_budget, ImprovedEngine};
use crate::protocol::{evaluate_outcome, generate_protocol, ProtocolPlan};
use crate::twolevel::rabi_2pik;

pub const DEFAULT_THRESHOLD: f64 = 1e-5;
/// Initial bracket for threshold searches in `delta_omega`.
pub const SEARCH_BRACKET: (f64, f64) = (2.0, 1e6);
/// Largest `delta_omega` the bracket may expand to.
pub const SEARCH_CEILING: f64 = 1e12;
pub const SEARCH_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    TwoLevel,
    Estimator,
    Improved,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Exact, Engine::TwoLevel, Engine::Estimator, Engine::Improved];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::TwoLevel => "twolevel",
            Engine::Estimator => "estimator",
            Engine::Improved => "improved",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown engine {s:?}; expected exact, twolevel, estimator or improved")))
    }
}

/// Inclusive arithmetic grid `start, start + step, ..., <= stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, value, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return invalid("grid bounds must be finite");
        }
        if self.step <= 0.0 {
            return invalid(format!("grid step must be positive, got {}", self.step));
        }
        if self.stop < self.start {
            return invalid(format!("empty grid: stop {} below start {}", self.stop, self.start));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.validate().is_err() {
            return Vec::new();
        }
        let n = ((self.stop - self.start) / self.step * (1.0 + 1e-12)).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub len: usize,
    pub engine: Engine,
    pub omega: Grid,
    pub delta_omega: Grid,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub k_2pik: Option<u32>,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_omega0() -> f64 {
    DEFAULT_OMEGA0
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.omega.validate()?;
        self.delta_omega.validate()?;
        if self.len < 3 {
            return invalid(format!("the protocol needs at least 3 spins, got {}", self.len));
        }
        if self.engine == Engine::Exact {
            let limit = ExactEngine::default().limit;
            if self.len > limit {
                return Err(Error::Capacity { len: self.len, limit });
            }
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return invalid(format!("threshold must be positive, got {}", self.threshold));
        }
        Ok(())
    }
}

/// Result of running the protocol at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEval {
    pub p: f64,
    /// Not available from the closed-form estimator.
    pub phi1: Option<f64>,
    pub phi2: Option<f64>,
}

/// Runs the full protocol with the chosen engine.
pub fn evaluate_plan(engine: Engine, plan: &ProtocolPlan) -> Result<PointEval> {
    let system = &plan.system;
    let run = |e: ImprovedEngine| -> Result<PointEval> {
        let run = e.run_protocol(system, &plan.pulse_list(), &AmplitudeMap::ground(system.len()))?;
        Ok(from_state(&run.final_state, plan))
    };
    match engine {
        Engine::Estimator => Ok(PointEval {
            p: error_budget(plan)?.total_p,
            phi1: None,
            phi2: None,
        }),
        Engine::Exact => {
            let run = ExactEngine::default().run_protocol(system, &plan.pulse_list(), &AmplitudeMap::ground(system.len()))?;
            Ok(from_state(&run.final_state, plan))
        }
        Engine::Improved => run(ImprovedEngine::default()),
        Engine::TwoLevel => run(ImprovedEngine::two_level()),
    }
}

fn from_state(state: &AmplitudeMap, plan: &ProtocolPlan) -> PointEval {
    let out = evaluate_outcome(state, plan);
    PointEval {
        p: out.error_probability,
        phi1: Some(out.phi1),
        phi2: Some(out.phi2),
    }
}

pub fn evaluate_point(engine: Engine, system: &SpinSystem, omega: f64) -> Result<PointEval> {
    evaluate_plan(engine, &generate_protocol(system, omega, None)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionRow {
    pub delta_omega: f64,
    pub omega: f64,
    pub result: std::result::Result<PointEval, Error>,
    pub below_threshold: Option<bool>,
}

/// Error probability on the grid, `delta_omega` outer and `omega` inner.
/// Failures are recorded per point.
pub fn region_diagram(spec: &SweepSpec) -> Result<Vec<RegionRow>> {
    spec.validate()?;
    let points: Vec<(f64, f64)> = spec
        .delta_omega
        .values()
        .into_iter()
        .flat_map(|dw| spec.omega.values().into_iter().map(move |om| (dw, om)))
        .collect();
    Ok(points
        .into_par_iter()
        .map(|(delta_omega, omega)| {
            let result = SpinSystem::new(spec.len, spec.omega0, delta_omega).and_then(|sys| evaluate_point(spec.engine, &sys, omega));
            let below_threshold = result.as_ref().ok().map(|r| r.p < spec.threshold);
            RegionRow {
                delta_omega,
                omega,
                result,
                below_threshold,
            }
        })
        .collect())
}

/// Smallest `delta_omega` with `P <= threshold` for the given engine, by
/// bisection in `log(delta_omega)` to a relative width of [`SEARCH_TOLERANCE`].
/// Assumes `P` decreases with `delta_omega`.
pub fn threshold_delta_omega(engine: Engine, len: usize, omega0: f64, omega: f64, threshold: f64) -> Result<f64> {
    let p_at = |dw: f64| -> Result<f64> { Ok(evaluate_point(engine, &SpinSystem::new(len, omega0, dw)?, omega)?.p) };
    bisect_spacing(p_at, threshold)
}

fn bisect_spacing(p_at: impl Fn(f64) -> Result<f64>, threshold: f64) -> Result<f64> {
    let (mut lo, mut hi) = SEARCH_BRACKET;
    if p_at(lo)? <= threshold {
        return Ok(lo);
    }
    while p_at(hi)? > threshold {
        if hi >= SEARCH_CEILING {
            return Err(Error::NoRoot { lo: SEARCH_BRACKET.0, hi });
        }
        lo = hi;
        hi = (hi * 10.0).min(SEARCH_CEILING);
    }
    while hi / lo > 1.0 + SEARCH_TOLERANCE {
        let mid = (lo * hi).sqrt();
        if p_at(mid)? <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub len: usize,
    pub delta_omega_min: std::result::Result<f64, Error>,
}

/// Minimum spacing for each chain length with `omega` set by the 2pi-k rule,
/// using the closed-form estimator.
pub fn scaling_curve(lens: &[usize], k_2pik: u32, threshold: f64, omega0: f64) -> Result<Vec<ScalingRow>> {
    let omega = rabi_2pik(2.0 * ISING_J, k_2pik)?;
    Ok(lens
        .par_iter()
        .map(|&len| ScalingRow {
            len,
            delta_omega_min: threshold_delta_omega(Engine::Estimator, len, omega0, omega, threshold),
        })
        .collect())
}

/// Largest chain length in `[3, max_len]` whose estimated error stays at or
/// below `threshold` at the given spacing; `None` if even `L = 3` fails.
pub fn max_feasible_len(k_2pik: u32, threshold: f64, delta_omega: f64, omega0: f64, max_len: usize) -> Result<Option<usize>> {
    let omega = rabi_2pik(2.0 * ISING_J, k_2pik)?;
    let ok = |len: usize| -> Result<bool> {
        let sys = SpinSystem::new(len, omega0, delta_omega)?;
        Ok(evaluate_point(Engine::Estimator, &sys, omega)?.p <= threshold)
    };
    if !ok(3)? {
        return Ok(None);
    }
    if ok(max_len)? {
        return Ok(Some(max_len));
    }
    let (mut lo, mut hi) = (3, max_len);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Points `(delta_omega, omega)` on the `P = threshold` contour of `engine`,
/// one per entry of `omegas`. Omegas without a crossing are skipped.
pub fn boundary_path(engine: Engine, len: usize, omega0: f64, omegas: &[f64], threshold: f64) -> Result<Vec<(f64, f64)>> {
    let found: Vec<Result<Option<(f64, f64)>>> = omegas
        .par_iter()
        .map(|&omega| match threshold_delta_omega(engine, len, omega0, omega, threshold) {
            Ok(dw) => Ok(Some((dw, omega))),
            Err(Error::NoRoot { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut path = Vec::new();
    for p in found {
        if let Some(point) = p? {
            path.push(point);
        }
    }
    Ok(path)
}

/// Relative half-width of the window searched for a point inside the region
/// when `center` itself lies outside.
pub const SEED_WINDOW: f64 = 2e-3;
const SEED_STEPS: i32 = 40;

/// The two Rabi frequencies where `P` crosses `threshold` at fixed spacing,
/// on either side of a point inside the region. The interior point is
/// `center` if it qualifies, otherwise the lowest-`P` point of a scan over
/// `center * (1 +- SEED_WINDOW)`.
pub fn omega_boundary(engine: Engine, system: &SpinSystem, center: f64, threshold: f64) -> Result<(f64, f64)> {
    let p_at = |omega: f64| -> Result<f64> { Ok(evaluate_point(engine, system, omega)?.p) };
    let mut seed = (center, p_at(center)?);
    if seed.1 > threshold {
        for j in (-SEED_STEPS..=SEED_STEPS).filter(|&j| j != 0) {
            let omega = center * (1.0 + SEED_WINDOW * f64::from(j) / f64::from(SEED_STEPS));
            let p = p_at(omega)?;
            if p < seed.1 {
                seed = (omega, p);
            }
        }
        if seed.1 > threshold {
            return Err(Error::NoRoot {
                lo: center * (1.0 - SEED_WINDOW),
                hi: center * (1.0 + SEED_WINDOW),
            });
        }
    }
    let center = seed.0;
    let edge = |dir: f64| -> Result<f64> {
        let mut step = 1e-6 * center;
        let mut inside = center;
        loop {
            let probe = center + dir * step;
            if probe <= 0.0 {
                return Err(Error::NoRoot { lo: 0.0, hi: center });
            }
            if p_at(probe)? > threshold {
                let mut outside = probe;
                while (outside - inside).abs() > 1e-10 * center {
                    let mid = 0.5 * (inside + outside);
                    if p_at(mid)? <= threshold {
                        inside = mid;
                    } else {
                        outside = mid;
                    }
                }
                return Ok(inside);
            }
            inside = probe;
            step *= 2.0;
            if step > center {
                return Err(Error::NoRoot {
                    lo: center,
                    hi: center + dir * step,
                });
            }
        }
    };
    Ok((edge(-1.0)?, edge(1.0)?))
}

/// Tip of the region: the smallest spacing at which the 2pi-k amplitude
/// `omega^(k)` for a detuning of `2J` reaches the threshold.
pub fn region_tip(engine: Engine, len: usize, omega0: f64, k_2pik: u32, threshold: f64) -> Result<(f64, f64)> {
    let omega = rabi_2pik(2.0 * ISING_J, k_2pik)?;
    Ok((threshold_delta_omega(engine, len, omega0, omega, threshold)?, omega))
}

/// Points on both branches of the region boundary of `engine`, at spacings
/// `delta_omega_tip * factor` (each factor above one), lower branch first.
pub fn region_boundary(engine: Engine, len: usize, omega0: f64, k_2pik: u32, threshold: f64, factors: &[f64]) -> Result<Vec<(f64, f64)>> {
    let (tip, omega) = region_tip(engine, len, omega0, k_2pik, threshold)?;
    let branches: Vec<Result<(f64, (f64, f64))>> = factors
        .par_iter()
        .map(|&f| {
            let dw = tip * f;
            let sys = SpinSystem::new(len, omega0, dw)?;
            Ok((dw, omega_boundary(engine, &sys, omega, threshold)?))
        })
        .collect();
    let branches = branches.into_iter().collect::<Result<Vec<_>>>()?;
    let mut path: Vec<(f64, f64)> = branches.iter().map(|&(dw, (lo, _))| (dw, lo)).collect();
    path.extend(branches.iter().map(|&(dw, (_, hi))| (dw, hi)));
    Ok(path)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub point: usize,
    pub delta_omega: f64,
    pub omega: f64,
    pub exact: std::result::Result<PointEval, Error>,
    pub estimator: std::result::Result<PointEval, Error>,
    pub improved: std::result::Result<PointEval, Error>,
}

/// Runs the exact, estimator and improved engines along a path of
/// `(delta_omega, omega)` points.
pub fn compare_engines(len: usize, omega0: f64, path: &[(f64, f64)]) -> Result<Vec<CompareRow>> {
    let limit = ExactEngine::default().limit;
    if len > limit {
        return Err(Error::Capacity { len, limit });
    }
    Ok(path
        .par_iter()
        .enumerate()
        .map(|(point, &(delta_omega, omega))| {
            let plan = SpinSystem::new(len, omega0, delta_omega).and_then(|sys| generate_protocol(&sys, omega, None));
            let eval = |engine| plan.as_ref().map_err(Clone::clone).and_then(|plan| evaluate_plan(engine, plan));
            CompareRow {
                point,
                delta_omega,
                omega,
                exact: eval(Engine::Exact),
                estimator: eval(Engine::Estimator),
                improved: eval(Engine::Improved),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL {
            assert_eq!(e.name().parse::<Engine>().unwrap(), e);
        }
        assert!("dense".parse::<Engine>().is_err());
    }

    #[test]
    fn grid_values_are_inclusive() {
        let g = Grid::new(0.1, 0.5, 0.1);
        assert_eq!(g.values().len(), 5);
        assert!((g.values()[4] - 0.5).abs() < 1e-15);
        assert_eq!(Grid::single(3.0).values(), vec![3.0]);
        assert!(Grid::new(1.0, 0.0, 0.1).validate().is_err());
        assert!(Grid::new(0.0, 1.0, 0.0).validate().is_err());
    }

    fn spec(engine: Engine, len: usize) -> SweepSpec {
        SweepSpec {
            len,
            engine,
            omega: Grid::new(0.1, 0.3, 0.1),
            delta_omega: Grid::new(100.0, 200.0, 100.0),
            threshold: DEFAULT_THRESHOLD,
            k_2pik: None,
            omega0: DEFAULT_OMEGA0,
        }
    }

    #[test]
    fn exact_sweep_over_limit_is_rejected() {
        assert_eq!(region_diagram(&spec(Engine::Exact, 15)).unwrap_err().kind(), "capacity");
    }

    #[test]
    fn region_order_and_degenerate_threshold() {
        let mut s = spec(Engine::Estimator, 6);
        s.threshold = 2.0;
        let rows = region_diagram(&s).unwrap();
        let coords: Vec<(f64, f64)> = rows.iter().map(|r| (r.delta_omega, r.omega)).collect();
        assert_eq!(coords.len(), 6);
        assert_eq!(coords[0].0, 100.0);
        assert_eq!(coords[2].0, 100.0);
        assert_eq!(coords[3].0, 200.0);
        assert!(rows.iter().all(|r| r.below_threshold == Some(true)));
    }

    #[test]
    fn bisection_finds_known_root() {
        // P = 1/dw^2 crosses 1e-6 at dw = 1000
        let dw = bisect_spacing(|dw| Ok(1.0 / (dw * dw)), 1e-6).unwrap();
        assert!((1000.0..=1000.0 * (1.0 + SEARCH_TOLERANCE)).contains(&dw));
        let err = bisect_spacing(|_| Ok(1.0), 1e-6).unwrap_err();
        assert_eq!(err.kind(), "no_root");
        assert_eq!(bisect_spacing(|_| Ok(0.0), 1e-6).unwrap(), SEARCH_BRACKET.0);
        // needs expansion beyond the initial bracket
        let far = bisect_spacing(|dw| Ok(1.0 / dw), 1e-8).unwrap();
        assert!((1e8..=1e8 * (1.0 + SEARCH_TOLERANCE)).contains(&far));
    }

    #[test]
    fn scaling_is_monotone_in_length() {
        let rows = scaling_curve(&[4, 8, 16, 32], 5, 1e-5, DEFAULT_OMEGA0).unwrap();
        let dws: Vec<f64> = rows.iter().map(|r| *r.delta_omega_min.as_ref().unwrap()).collect();
        for w in dws.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
}
