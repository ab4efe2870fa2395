//! Run configuration: a TOML file whose keys mirror the command-line flags.
//! Flags given on the command line win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use spinchain::sweep::{Engine, Grid};

/// A number or a `start:stop:step` range.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Span {
    Value(f64),
    Text(String),
}

impl Span {
    pub fn grid(&self) -> Result<Grid> {
        match self {
            Span::Value(v) => Ok(Grid::single(*v)),
            Span::Text(s) => parse_grid(s),
        }
    }

    pub fn single(&self) -> Result<f64> {
        let g = self.grid()?;
        if g.values().len() != 1 {
            bail!("expected a single value, got the range {g:?}");
        }
        Ok(g.start)
    }
}

/// `"x"` or `"start:stop:step"`.
pub fn parse_grid(s: &str) -> Result<Grid> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| -> Result<f64> { p.parse::<f64>().with_context(|| format!("bad number {p:?} in {s:?}")) };
    let grid = match parts.as_slice() {
        [v] => Grid::single(num(v)?),
        [a, b, step] => Grid::new(num(a)?, num(b)?, num(step)?),
        _ => bail!("expected a value or start:stop:step, got {s:?}"),
    };
    grid.validate()?;
    Ok(grid)
}

/// `"10,20,40"` or `"start:stop:step"` (inclusive) or a mix of both.
pub fn parse_lens(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let num = |p: &str| -> Result<usize> { p.trim().parse::<usize>().with_context(|| format!("bad chain length {p:?}")) };
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if step == 0 || b < a {
                    bail!("empty length range {item:?}");
                }
                out.extend((a..=b).step_by(step));
            }
            _ => bail!("expected a length list or start:stop:step, got {item:?}"),
        }
    }
    if out.is_empty() {
        bail!("no chain lengths given");
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub engine: Option<String>,
    #[serde(rename = "L")]
    pub len: Option<LenSpec>,
    pub omega: Option<Span>,
    pub delta_omega: Option<Span>,
    pub k: Option<u32>,
    pub threshold: Option<f64>,
    pub omega0: Option<f64>,
    pub out: Option<PathBuf>,
    /// Spacing multiples of the region tip used by `compare`.
    pub factors: Option<Vec<f64>>,
    /// Explicit `[delta_omega, omega]` points for `compare`.
    pub points: Option<Vec<[f64; 2]>>,
}

/// A single length or a list expression.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LenSpec {
    One(usize),
    Text(String),
}

impl LenSpec {
    pub fn lens(&self) -> Result<Vec<usize>> {
        match self {
            LenSpec::One(n) => Ok(vec![*n]),
            LenSpec::Text(s) => parse_lens(s),
        }
    }

    pub fn single(&self) -> Result<usize> {
        let lens = self.lens()?;
        match lens.as_slice() {
            [n] => Ok(*n),
            _ => bail!("expected a single chain length, got {} values", lens.len()),
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn engine(&self) -> Result<Option<Engine>> {
        self.engine.as_deref().map(|e| e.parse::<Engine>().map_err(Into::into)).transpose()
    }
}
