//! `mfsde`: batch front end for simulation, the approximation hierarchy,
//! assumption validation and the uniqueness diagnostic.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfsde_core::scenario::ModeName;
use mfsde_core::Error;

#[derive(Parser, Debug)]
#[command(name = "mfsde", version, about = "Mean-field jump SDE simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an ensemble of the coupled system.
    Simulate(RunArgs),
    /// Build the monotone approximation hierarchy and check its properties.
    Approx(ApproxArgs),
    /// Check the coefficient and drift assumptions.
    Validate(ValidateArgs),
    /// Refinement self-consistency diagnostic with test-function moments.
    Uniqueness(UniquenessArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; falls back to MFSDE_OUT, then `out`.
    #[arg(long, env = "MFSDE_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Trajectories written to the long-format path CSV.
    #[arg(long, default_value_t = 20)]
    pub path_limit: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub mode: Option<ModeName>,
}

#[derive(Args, Debug, Clone)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, env = "MFSDE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct UniquenessArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
}

/// Exit statuses.
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERIC: u8 = 2;
pub const EXIT_USAGE: u8 = 3;

/// A command failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite { .. } | Error::Numerical(_) => EXIT_NUMERIC,
            _ => EXIT_VALIDATION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Approx(a) => commands::approx(&a),
        Command::Validate(a) => commands::validate(&a),
        Command::Uniqueness(a) => commands::uniqueness(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
