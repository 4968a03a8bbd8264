//! The `merton-arena` command line.
//!
//! Exit codes: 0 success, 1 verification failed, 2 invalid input, 3 numerical
//! failure.

mod commands;
pub mod config;
pub mod csv;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::simulation::{DEFAULT_PATHS, DEFAULT_STEPS};
use crate::verification::DEFAULT_ORACLE_STEPS;

pub use config::{ConstantStrategy, InputConfig, Model};
pub use csv::read_solve_n;

pub const THREADS_ENV: &str = "MERTON_ARENA_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed")]
    VerificationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerificationFailed => 1,
            CliError::Usage(_) | CliError::Json(_) => 2,
            CliError::Model(e) if e.is_validation() => 2,
            CliError::Model(_) | CliError::Io(_) => 3,
        }
    }
}

/// Inclusive `a:b:k` range of `k` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| if k + 1 == self.count { self.end } else { self.start + step * k as f64 })
            .collect()
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, k] = parts.as_slice() else {
            return Err(format!("expected a:b:k, got {s:?}"));
        };
        let start: f64 = a.parse().map_err(|_| format!("bad start {a:?}"))?;
        let end: f64 = b.parse().map_err(|_| format!("bad end {b:?}"))?;
        let count: usize = k.parse().map_err(|_| format!("bad count {k:?}"))?;
        if count == 0 || !start.is_finite() || !end.is_finite() {
            return Err(format!("empty or non-finite range {s:?}"));
        }
        Ok(Range { start, end, count })
    }
}

#[derive(Debug, Parser)]
#[command(name = "merton-arena", version, about = "Competitive Merton equilibria: solve, plot data, simulate, verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form n-agent equilibrium, one CSV row per agent.
    SolveN(RunConfig),
    /// Mean-field equilibrium, one CSV row per atom.
    SolveMf(RunConfig),
    /// Consumption curves c(t) on a time grid.
    Curves(RunConfig),
    /// Consumption regime over a (delta, theta) grid.
    Regime(RunConfig),
    /// Consumption at T/2 over a (delta, theta) grid.
    Sweep(RunConfig),
    /// Monte Carlo log-wealth summaries.
    Simulate(RunConfig),
    /// Fixed-point, best-response and convergence checks; JSON report.
    Verify(RunConfig),
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// JSON population or distribution.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Monte Carlo time steps.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub grid: usize,
    /// Monte Carlo paths.
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "0.05:5:100")]
    pub delta_range: Range,
    #[arg(long, default_value = "0:1:101")]
    pub theta_range: Range,
    /// Output time points for curves and simulation summaries.
    #[arg(long, default_value_t = 101)]
    pub time_grid: usize,
    /// Risk tolerances of the representative agent for `curves`.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Agents tested by `verify`; all when absent.
    #[arg(long, value_delimiter = ',')]
    pub agent: Option<Vec<usize>>,
    /// ODE oracle steps for `verify`.
    #[arg(long, default_value_t = DEFAULT_ORACLE_STEPS)]
    pub steps: usize,
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.grid < 2 {
            return Err(CliError::Usage(format!("--grid must be at least 2, got {}", self.grid)));
        }
        if self.paths < 1 {
            return Err(CliError::Usage("--paths must be at least 1".into()));
        }
        if self.time_grid < 2 {
            return Err(CliError::Usage("--time-grid must be at least 2".into()));
        }
        if self.steps < 2 {
            return Err(CliError::Usage("--steps must be at least 2".into()));
        }
        Ok(())
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k: usize = v
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer")))?;
        // fails only if a pool already exists, which keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

type Produce = fn(&RunConfig, &InputConfig) -> Result<String, CliError>;

/// Run a parsed command; the output is written once at the end.
pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (args, produce): (&RunConfig, Produce) =
        match &cli.command {
            Command::SolveN(a) => (a, commands::solve_n),
            Command::SolveMf(a) => (a, commands::solve_mf),
            Command::Curves(a) => (a, commands::curves),
            Command::Regime(a) => (a, commands::regime),
            Command::Sweep(a) => (a, commands::sweep),
            Command::Simulate(a) => (a, commands::simulate),
            Command::Verify(a) => {
                a.validate()?;
                let input = InputConfig::load(&a.config)?;
                let (text, passed) = commands::verify(a, &input)?;
                emit(&a.out, &text)?;
                return if passed { Ok(()) } else { Err(CliError::VerificationFailed) };
            }
        };
    args.validate()?;
    let input = InputConfig::load(&args.config)?;
    let text = produce(args, &input)?;
    emit(&args.out, &text)
}

/// Parse the process arguments, run, and map the outcome to an exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("merton-arena: {e}");
            e.exit_code()
        }
    }
}
