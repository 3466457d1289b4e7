//! `mdisc`: discretize sampled metric measure spaces and run the analysis
//! checks from the command line.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input, 3 a built-in
//! check failed.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metric_discretize::Error as CoreError;
use thiserror::Error;

use crate::config::{Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Io(_) | CoreError::Json(_) => 1,
                _ => 2,
            },
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "mdisc", version, about = "Epsilon-net discretization of metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Build the net and graph of a space and print a summary.
    Discretize(Flags),
    /// Reproduce the dyadic plane grid example.
    ReproduceGrid(Flags),
    /// Check the uniformity conditions over a nested chain of levels.
    Multiscale(Flags),
    /// Estimate the discrete Poincaré constant of one ball.
    Poincare(Flags),
    /// Check the pointed Gromov-Hausdorff conditions level by level.
    Ghcheck(Flags),
}

#[derive(Args)]
struct Flags {
    /// lattice:DIM:SCALE:EXTENT, cloud:PATH[:MEASURE], sierpinski:LEVEL, path:N or cycle:N.
    #[arg(long)]
    space: Option<String>,
    /// Net scale (coarsest scale for multilevel commands).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Level count, or an inclusive range A..B for reproduce-grid.
    #[arg(long)]
    levels: Option<String>,
    /// Poincaré exponent p >= 1.
    #[arg(long = "p")]
    p: Option<f64>,
    /// Poincaré dilation factor lambda >= 1.
    #[arg(long)]
    lambda: Option<f64>,
    /// Seed for net ordering and random test functions.
    #[arg(long)]
    seed: Option<u64>,
    /// Random functions per Poincaré suite.
    #[arg(long)]
    suite_size: Option<usize>,
    /// Poincaré ball radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Poincaré ball center (vertex index).
    #[arg(long)]
    center: Option<usize>,
    /// Also run the exact p = 1 oracle (tiny balls only).
    #[arg(long)]
    oracle: bool,
    /// GH ball radius.
    #[arg(long = "r")]
    r: Option<f64>,
    /// GH tolerance.
    #[arg(long)]
    eta: Option<f64>,
    /// Bi-Lipschitz constant for the GH defect bound (measured if omitted).
    #[arg(long = "l")]
    l: Option<f64>,
    /// Sampled point pairs per GH level.
    #[arg(long)]
    pairs: Option<usize>,
    /// Output file (a directory for discretize).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write flat CSV tables next to the output.
    #[arg(long)]
    emit_table: bool,
    /// JSON run config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn merge(self, command: Command) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    c.$f = v;
                }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    c.$f = self.$f;
                }
            )*};
        }
        set!(p, lambda, seed, suite_size, r, eta, pairs);
        set_opt!(space, epsilon, levels, radius, center, l, out);
        c.oracle |= self.oracle;
        c.emit_table |= self.emit_table;
        c.resolve(command)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Discretize(f) => (Command::Discretize, f),
        Sub::ReproduceGrid(f) => (Command::ReproduceGrid, f),
        Sub::Multiscale(f) => (Command::Multiscale, f),
        Sub::Poincare(f) => (Command::Poincare, f),
        Sub::Ghcheck(f) => (Command::Ghcheck, f),
    };
    let result = flags.merge(command).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(outcome) if outcome.pass => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("mdisc: a built-in check failed; see the report");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("mdisc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
