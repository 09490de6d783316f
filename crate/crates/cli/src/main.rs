//! `infogen`: evaluate and verify generalization bounds from a problem file.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use infogen::bounds::{BoundId, GammaChoice, MomentOrder};
use infogen::prob::DEFAULT_ATOM_BUDGET;
use infogen::verify::CheckKind;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "infogen", version, about = "Information-density generalization bounds on finite problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print every information measure of the model.
    Measures(MeasuresArgs),
    /// Evaluate one bound.
    Bound(BoundArgs),
    /// Run verifier checks; exits 1 if any fails.
    Verify(VerifyArgs),
    /// Tabulate bounds along one parameter axis.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem specification (JSON).
    #[arg(long, value_name = "FILE")]
    pub problem: PathBuf,

    /// Override the sample size from the spec.
    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Write output here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Maximum number of joint atoms to enumerate.
    #[arg(long, default_value_t = DEFAULT_ATOM_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub delta: Option<f64>,

    /// Moment order, or `inf`.
    #[arg(long)]
    pub m: Option<MomentOrder>,

    #[arg(long)]
    pub alpha: Option<f64>,

    /// Threshold for strong_converse, or `optimize`.
    #[arg(long)]
    pub gamma: Option<GammaChoice>,
}

#[derive(Debug, Clone, Args)]
pub struct MeasuresArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    pub bound: BoundId,

    #[command(flatten)]
    pub params: ParamArgs,

    #[arg(long, default_value_t = 1.0)]
    pub epsilon_scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,

    /// Checks to run (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = CheckKind::ALL.map(|c| c.as_str().to_string()))]
    pub suite: Vec<String>,

    #[arg(long, value_delimiter = ',', default_values_t = infogen::verify::DEFAULT_DELTAS)]
    pub delta_grid: Vec<f64>,

    /// Restrict coverage to these bounds.
    #[arg(long, value_delimiter = ',')]
    pub bounds: Vec<BoundId>,

    /// Also estimate coverage by Monte Carlo sampling.
    #[arg(long)]
    pub mc: bool,

    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Multiply every ε before checking coverage.
    #[arg(long, default_value_t = 1.0)]
    pub epsilon_scale: f64,

    /// Externally supplied ε for Monte Carlo runs on models too large to
    /// enumerate.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Include per-atom detail in coverage reports.
    #[arg(long)]
    pub detail: bool,

    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Delta,
    M,
    Alpha,
    N,
    Beta,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long, value_enum)]
    pub axis: Axis,

    /// Axis values (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Vec<String>,

    #[arg(long, value_delimiter = ',', required = true)]
    pub bounds: Vec<BoundId>,

    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Spec { path: String, message: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("verification failed: {0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Measures(a) => commands::measures(&a),
        Command::Bound(a) => commands::bound(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
