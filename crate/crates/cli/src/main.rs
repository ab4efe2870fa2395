use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use spinchain::model::DEFAULT_OMEGA0;
use spinchain::sweep::{Engine, DEFAULT_THRESHOLD};

mod commands;
mod config;

use config::{parse_grid, parse_lens, FileConfig, LenSpec, Span};

/// Simulate the pulse protocol that prepares an entangled state on an Ising
/// spin chain, and map where its error stays small.
#[derive(Debug, Parser)]
#[command(name = "spinchain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the protocol at one parameter point and print a JSON summary.
    Simulate(Common),
    /// Error probability over an (omega, delta-omega) grid, as CSV.
    Region(Common),
    /// Minimum spacing versus chain length, as CSV.
    Scaling(Common),
    /// Exact, estimator and improved engines along a path, as CSV.
    Compare(CompareArgs),
    /// Print the pulse table; `--out` writes the plan as JSON.
    ProtocolDump(Common),
}

#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// exact, twolevel, estimator or improved.
    #[arg(long)]
    engine: Option<Engine>,
    /// Chain length, or a list like `10,20,50:100:10` for scaling.
    #[arg(long = "L")]
    len: Option<String>,
    /// Rabi frequency, or `start:stop:step`.
    #[arg(long)]
    omega: Option<String>,
    /// Larmor spacing, or `start:stop:step`.
    #[arg(long = "delta-omega")]
    delta_omega: Option<String>,
    /// Pick omega by the 2pi-k rule instead of `--omega`.
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Larmor frequency of spin 0.
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Spacing multiples of the region tip, comma separated.
    #[arg(long, value_delimiter = ',')]
    factors: Option<Vec<f64>>,
}

/// Flags merged over the config file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub engine: Option<Engine>,
    pub len: Option<LenSpec>,
    pub omega: Option<Span>,
    pub delta_omega: Option<Span>,
    pub k: Option<u32>,
    pub threshold: f64,
    pub omega0: f64,
    pub out: Option<PathBuf>,
    pub factors: Option<Vec<f64>>,
    pub points: Option<Vec<[f64; 2]>>,
}

impl Settings {
    fn resolve(flags: &Common, factors: Option<Vec<f64>>) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let engine = match flags.engine {
            Some(e) => Some(e),
            None => file.engine()?,
        };
        if let Some(s) = &flags.omega {
            parse_grid(s)?;
        }
        if let Some(s) = &flags.delta_omega {
            parse_grid(s)?;
        }
        if let Some(s) = &flags.len {
            parse_lens(s)?;
        }
        let threshold = flags.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
        if !(threshold.is_finite() && threshold > 0.0) {
            bail!(spinchain::Error::InvalidInput(format!(
                "threshold must be positive, got {threshold}"
            )));
        }
        Ok(Self {
            engine,
            len: flags.len.clone().map(LenSpec::Text).or(file.len),
            omega: flags.omega.clone().map(Span::Text).or(file.omega),
            delta_omega: flags.delta_omega.clone().map(Span::Text).or(file.delta_omega),
            k: flags.k.or(file.k),
            threshold,
            omega0: flags.omega0.or(file.omega0).unwrap_or(DEFAULT_OMEGA0),
            out: flags.out.clone().or(file.out),
            factors: factors.or(file.factors),
            points: file.points,
        })
    }

    pub fn engine(&self, default: Engine) -> Engine {
        self.engine.unwrap_or(default)
    }

    pub fn chain_len(&self) -> Result<usize> {
        match &self.len {
            Some(l) => l.single(),
            None => bail!(spinchain::Error::InvalidInput("missing --L".into())),
        }
    }

    pub fn lens(&self) -> Result<Vec<usize>> {
        match &self.len {
            Some(l) => l.lens(),
            None => bail!(spinchain::Error::InvalidInput("missing --L".into())),
        }
    }

    pub fn omega_span(&self) -> Result<&Span> {
        self.omega
            .as_ref()
            .ok_or_else(|| spinchain::Error::InvalidInput("missing --omega".into()).into())
    }

    pub fn delta_omega_span(&self) -> Result<&Span> {
        self.delta_omega
            .as_ref()
            .ok_or_else(|| spinchain::Error::InvalidInput("missing --delta-omega".into()).into())
    }

    /// Omega for single-point commands. `--k` takes precedence.
    pub fn omega(&self) -> Result<f64> {
        if self.k.is_some() {
            return Ok(0.0);
        }
        self.omega_span()?.single()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&Settings::resolve(&c, None)?),
        Command::Region(c) => commands::region(&Settings::resolve(&c, None)?),
        Command::Scaling(c) => commands::scaling(&Settings::resolve(&c, None)?),
        Command::Compare(c) => commands::compare(&Settings::resolve(&c.common, c.factors)?),
        Command::ProtocolDump(c) => commands::protocol_dump(&Settings::resolve(&c, None)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.downcast_ref::<spinchain::Error>().map_or("error", |e| e.kind());
            let report = serde_json::json!({
                "error": kind,
                "message": format!("{err:#}"),
            });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
