use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;
use spinchain::exact::ExactEngine;
use spinchain::perturb::{error_budget, ImprovedEngine};
use spinchain::protocol::{evaluate_outcome, generate_protocol, ProtocolPlan};
use spinchain::sweep::{self, Engine, PointEval, SweepSpec};
use spinchain::{AmplitudeMap, SpinSystem};

use crate::Settings;

/// Spacings of the compared boundary, in units of the region tip.
pub const DEFAULT_FACTORS: [f64; 5] = [1.02, 1.1, 1.25, 1.5, 2.0];

fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn plan(s: &Settings) -> Result<ProtocolPlan> {
    let system = SpinSystem::new(s.chain_len()?, s.omega0, s.delta_omega_span()?.single()?)?;
    Ok(generate_protocol(&system, s.omega()?, s.k)?)
}

pub fn simulate(s: &Settings) -> Result<()> {
    let engine = s.engine(Engine::Improved);
    let plan = plan(s)?;
    let system = &plan.system;
    let initial = AmplitudeMap::ground(system.len());
    let mut summary = json!({
        "engine": engine.name(),
        "L": system.len(),
        "omega0": system.omega0(),
        "delta_omega": system.delta_omega(),
        "omega": plan.omega_rabi,
        "pulses": plan.len(),
    });
    let extra = |summary: &mut serde_json::Value, state: &AmplitudeMap, diag: serde_json::Value| -> Result<()> {
        let out = evaluate_outcome(state, &plan);
        summary["p"] = json!(out.error_probability);
        summary["ground_probability"] = json!(out.ground_probability);
        summary["target_probability"] = json!(out.target_probability);
        summary["phi1"] = json!(out.phi1);
        summary["phi2"] = json!(out.phi2);
        summary["support"] = json!(state.support());
        summary["diagnostics"] = diag;
        if let Some(path) = &s.out {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            state.write_csv(BufWriter::new(file))?;
        }
        Ok(())
    };
    match engine {
        Engine::Estimator => {
            let budget = error_budget(&plan)?;
            summary["p"] = json!(budget.total_p);
            summary["near_resonant_p"] = json!(budget.near_resonant_p()?);
            if let Some(path) = &s.out {
                let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                serde_json::to_writer_pretty(BufWriter::new(file), &budget)?;
            }
        }
        Engine::Exact => {
            let run = ExactEngine::default().run_protocol(system, &plan.pulse_list(), &initial)?;
            let worst = run.norm_drift.iter().cloned().fold(0.0, f64::max);
            extra(
                &mut summary,
                &run.final_state,
                json!({ "cumulative_norm_drift": run.cumulative_drift, "max_pulse_norm_drift": worst }),
            )?;
        }
        Engine::Improved | Engine::TwoLevel => {
            let eng = if engine == Engine::Improved {
                ImprovedEngine::default()
            } else {
                ImprovedEngine::two_level()
            };
            let run = eng.run_protocol(system, &plan.pulse_list(), &initial)?;
            extra(
                &mut summary,
                &run.final_state,
                json!({ "pruned_mass": run.pruned_mass, "max_support": run.max_support }),
            )?;
        }
    }
    writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn point_fields(r: &std::result::Result<PointEval, spinchain::Error>) -> [String; 4] {
    match r {
        Ok(e) => [sci(e.p), opt(e.phi1), opt(e.phi2), "ok".into()],
        Err(e) => [String::new(), String::new(), String::new(), e.kind().into()],
    }
}

pub fn region(s: &Settings) -> Result<()> {
    let spec = SweepSpec {
        len: s.chain_len()?,
        engine: s.engine(Engine::Estimator),
        omega: s.omega_span()?.grid()?,
        delta_omega: s.delta_omega_span()?.grid()?,
        threshold: s.threshold,
        k_2pik: None,
        omega0: s.omega0,
    };
    if s.k.is_some() {
        bail!(spinchain::Error::InvalidInput("region takes an omega grid, not --k".into()));
    }
    let rows = sweep::region_diagram(&spec)?;
    let mut w = csv::Writer::from_writer(sink(s.out.as_deref())?);
    w.write_record(["delta_omega", "omega", "p", "phi1", "phi2", "below_threshold", "status"])?;
    for row in rows {
        let [p, phi1, phi2, status] = point_fields(&row.result);
        let below = row.below_threshold.map(|b| b.to_string()).unwrap_or_default();
        w.write_record([sci(row.delta_omega), sci(row.omega), p, phi1, phi2, below, status])?;
    }
    w.flush()?;
    Ok(())
}

pub fn scaling(s: &Settings) -> Result<()> {
    let k = s.k.ok_or_else(|| spinchain::Error::InvalidInput("scaling needs --k".into()))?;
    if let Some(e) = s.engine {
        if e != Engine::Estimator {
            bail!(spinchain::Error::InvalidInput(format!(
                "scaling uses the estimator engine, got {e}"
            )));
        }
    }
    let rows = sweep::scaling_curve(&s.lens()?, k, s.threshold, s.omega0)?;
    let mut w = csv::Writer::from_writer(sink(s.out.as_deref())?);
    w.write_record(["L", "delta_omega_min", "status"])?;
    for row in rows {
        match row.delta_omega_min {
            Ok(dw) => w.write_record([row.len.to_string(), sci(dw), "ok".into()])?,
            Err(e) => w.write_record([row.len.to_string(), String::new(), e.kind().into()])?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn compare(s: &Settings) -> Result<()> {
    let len = s.chain_len()?;
    let path: Vec<(f64, f64)> = match (&s.points, s.k) {
        (Some(points), _) => points.iter().map(|&[dw, om]| (dw, om)).collect(),
        (None, Some(k)) => {
            let engine = s.engine(Engine::Estimator);
            let factors = s.factors.clone().unwrap_or_else(|| DEFAULT_FACTORS.to_vec());
            sweep::region_boundary(engine, len, s.omega0, k, s.threshold, &factors)?
        }
        (None, None) => bail!(spinchain::Error::InvalidInput(
            "compare needs --k or a points list in the config".into()
        )),
    };
    let rows = sweep::compare_engines(len, s.omega0, &path)?;
    let mut w = csv::Writer::from_writer(sink(s.out.as_deref())?);
    let mut header = vec!["point".to_string(), "delta_omega".into(), "omega".into()];
    for e in ["exact", "estimator", "improved"] {
        for f in ["p", "phi1", "phi2", "status"] {
            header.push(format!("{f}_{e}"));
        }
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.point.to_string(), sci(row.delta_omega), sci(row.omega)];
        for r in [&row.exact, &row.estimator, &row.improved] {
            rec.extend(point_fields(r));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn protocol_dump(s: &Settings) -> Result<()> {
    let plan = plan(s)?;
    write!(io::stdout().lock(), "{}", plan.to_table())?;
    if let Some(path) = &s.out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &plan)?;
    }
    Ok(())
}
