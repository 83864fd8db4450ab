//! Command-line front end: `simulate`, `validate` and `fit`.

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use slitwave_core::{Error, ModeVariant, PatternKind, RunConfig};

pub mod fit;
pub mod simulate;
pub mod validate;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "SLITWAVE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "slitwave",
    version,
    about = "Slit diffraction and two-photon coincidence patterns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the detector angle and write singles and coincidence patterns.
    Simulate(SimulateArgs),
    /// Cross-check the closed-form model against brute-force quadrature.
    Validate(ValidateArgs),
    /// Fit model parameters to a measured count profile.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration (default: paper_fig4).
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Number of detector angles.
    #[arg(long, value_name = "N")]
    pub points: Option<usize>,
    /// Half-width of the angular sweep.
    #[arg(long = "beta-range", value_name = "MRAD")]
    pub beta_range: Option<f64>,
    #[arg(long, value_name = "1|2")]
    pub slits: Option<u8>,
    #[arg(long, value_name = "literal|shifted", value_parser = parse_variant)]
    pub variant: Option<ModeVariant>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
}

impl ConfigArgs {
    /// Loads the base configuration and applies command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                RunConfig::load(path).map_err(|e| Failure::from_core(e).context(path.display()))?
            }
            (None, Some(name)) => RunConfig::preset(name).map_err(Failure::from_core)?,
            (None, None) => RunConfig::paper_fig4(),
        };
        if let Some(v) = self.points {
            cfg.points = v;
        }
        if let Some(v) = self.beta_range {
            cfg.beta_range_mrad = v;
        }
        if let Some(v) = self.slits {
            cfg.slits = v;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(v) = self.c1 {
            cfg.c1 = v;
        }
        if let Some(v) = self.c2 {
            cfg.c2 = v;
        }
        cfg.validated().map_err(Failure::from_core)
    }
}

fn parse_variant(s: &str) -> Result<ModeVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_target(s: &str) -> Result<PatternKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Also write pattern.svg.
    #[arg(long)]
    pub svg: bool,
    /// Store wall time in the manifest (the manifest then differs between runs).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Fewer modes and angles; same pass thresholds.
    #[arg(long)]
    pub fast: bool,
    /// Deliberately corrupt one comparison to exercise the failure path.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Measured data with header beta_mrad,counts[,sigma].
    #[arg(long, value_name = "PATH")]
    pub reference: PathBuf,
    /// Comma-separated free parameters from c1, scale, b, c.
    #[arg(long, value_delimiter = ',', default_value = "c1,scale")]
    pub free: Vec<String>,
    #[arg(long, value_name = "singles|coincidence", default_value = "singles", value_parser = parse_target)]
    pub target: PatternKind,
    #[arg(long, default_value_t = 500)]
    pub max_evals: usize,
    /// Simplex spread relative to each parameter's search interval.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Starting c1 (default: the configuration's c1).
    #[arg(long, value_name = "C1")]
    pub c1_start: Option<f64>,
    #[arg(long, value_name = "SCALE", default_value_t = 1.0)]
    pub scale_start: f64,
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

/// A failed command with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn from_core(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::Parse { .. } => {
                EXIT_CONFIG
            }
            Error::Io(_) => EXIT_IO,
            Error::OutsideDomain(_)
            | Error::DirectionOutOfDomain { .. }
            | Error::Convergence { .. }
            | Error::Model { .. } => EXIT_VALIDATION,
        };
        let message = match &e {
            Error::InvalidConfig(v) => {
                let lines: Vec<String> = v.iter().map(|v| format!("  {v}")).collect();
                format!("invalid configuration:\n{}", lines.join("\n"))
            }
            other => other.to_string(),
        };
        Self { code, message }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

/// Reads the thread cap from the environment, if set.
pub fn thread_limit() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::new(
                EXIT_CONFIG,
                format!("{THREADS_ENV} must be a positive integer, got '{v}'"),
            )),
        },
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => simulate::run(&args).map(|_| ()),
        Command::Validate(args) => validate::run(&args),
        Command::Fit(args) => fit::run(&args).map(|_| ()),
    }
}
