//! `rb`: redundancy bottleneck curves, decompositions and exact redundancy
//! from the command line.

mod commands;
mod format;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use format::Units;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Size(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 2,
            CliError::Size(_) => 3,
        }
    }
}

/// What a successful command reports back to `main`.
pub enum Outcome {
    Done,
    /// Output was written but some solves hit the iteration cap.
    NotConverged(usize),
}

#[derive(Debug, Parser)]
#[command(name = "rb", version, about = "Redundancy bottleneck toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the problem JSON of a built-in example system.
    Gate(GateArgs),
    /// Trace the RB curve over a beta grid and write it as CSV.
    Sweep(SweepArgs),
    /// Interpolated RB prediction at a given compression rate.
    Point(PointArgs),
    /// Exact Blackwell redundancy by vertex enumeration.
    Exact(ExactArgs),
    /// Sweep plus per-source decomposition columns.
    Decompose(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GateArgs {
    /// unique, and, copy, bsc4 or threespin
    pub id: String,
    /// Disagreement parameter of the copy gate.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Comma-separated error rates for bsc4.
    #[arg(long, value_delimiter = ',')]
    pub errors: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveArg {
    Linear,
    Exp,
}

#[derive(Debug, Args, Clone)]
pub struct SolveArgs {
    /// Log-spaced grid as `min,max,count`.
    #[arg(long, default_value = "0.05,1000,60")]
    pub betas: String,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Exp)]
    pub objective: ObjectiveArg,
    /// Bottleneck cardinality; defaults to the number of source outcomes plus one.
    #[arg(long)]
    pub qsize: Option<usize>,
    /// Do not extend the grid below its minimum to reach zero compression.
    #[arg(long)]
    pub no_zero_rate: bool,
    #[arg(long, value_enum, default_value_t = Units::Bits)]
    pub units: Units,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Problem JSON file, or `-` for stdin.
    pub problem: String,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest destination; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Problem JSON file, or `-` for stdin. Not needed with `--curve`.
    pub problem: Option<String>,
    /// Compression rate, in `--units`.
    #[arg(long, allow_hyphen_values = true)]
    pub rate: f64,
    /// Reuse a curve CSV written by `sweep` instead of solving.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    /// Problem JSON file, or `-` for stdin.
    pub problem: String,
    /// Maximum number of basis candidates per enumeration.
    #[arg(long, default_value_t = 20_000_000)]
    pub budget: u128,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gate(a) => commands::gate(&a),
        Command::Sweep(a) => commands::sweep(&a, false),
        Command::Decompose(a) => commands::sweep(&a, true),
        Command::Point(a) => commands::point(&a),
        Command::Exact(a) => commands::exact(&a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged(n)) => {
            eprintln!("warning: {n} solve(s) stopped at the iteration cap; rows are flagged converged=false");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
