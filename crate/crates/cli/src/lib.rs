//! Command-line front end: configuration, presets, subcommands and
//! deterministic reports.

pub mod commands;
pub mod config;
pub mod json;
pub mod presets;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{PeriodicReport, SweepEntry};
pub use config::{load_config, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "perisys",
    version,
    about = "Periodic orbits of delayed degenerate parabolic systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled preset name.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the a priori constants and theorem verdicts.
    Check {
        #[command(flatten)]
        source: Source,
        /// Restrict to one theorem branch.
        #[arg(long)]
        theorem: Option<String>,
        /// Sup-norm stand-in for the gradient bounds.
        #[arg(long)]
        r_proxy: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First Dirichlet eigenpair of the r-Laplacian.
    Eig {
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        /// Second side length; solves on a rectangle when given.
        #[arg(long)]
        width: Option<f64>,
        #[arg(long, default_value_t = 200)]
        cells: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Transient run from the initial bump.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_parser = ["imex-lagged", "explicit"])]
        scheme: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Periodic orbit by the nested fixed-point iteration.
    Periodic {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        tol_outer: Option<f64>,
        #[arg(long)]
        tol_map: Option<f64>,
        /// Start value of the homotopy ramp in (0, 1].
        #[arg(long)]
        sigma_ramp: Option<f64>,
        /// Outer iterations over which the ramp reaches 1.
        #[arg(long, default_value_t = 5)]
        ramp_iterations: usize,
        #[arg(long)]
        out_traj: Option<PathBuf>,
        #[arg(long)]
        out_report: Option<PathBuf>,
    },
    /// Independent solves over an epsilon and resolution grid.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Comma-separated epsilon values overriding the config.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long)]
        continuation: bool,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a stored orbit against its report.
    Verify {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs one parsed command; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
