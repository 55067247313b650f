//! Configuration-driven front end for the plab experiments.
//!
//! Exit codes: 0 success, 1 selftest failure, 2 solver failure, 3 config
//! error, 4 too many balls fail the resolution guard, 5 every parameter row
//! was skipped, 6 output could not be written.

pub mod commands;
pub mod config;
pub mod inputs;
pub mod output;
pub mod selftest;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("selftest failed: {0}")]
    Selftest(String),
    #[error("solver failure: {0}")]
    Solver(plab_core::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("{failed} of {total} balls fail the resolution guard")]
    Resolution { failed: usize, total: usize },
    #[error("all {0} parameter rows were skipped")]
    AllRowsSkipped(usize),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Selftest(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Config(_) => 3,
            CliError::Resolution { .. } => 4,
            CliError::AllRowsSkipped(_) => 5,
            CliError::Output(_) => 6,
        }
    }
}

impl From<plab_core::Error> for CliError {
    fn from(e: plab_core::Error) -> Self {
        use plab_core::Error as E;
        match e {
            E::SolverFailure { .. } | E::NumericalBreakdown(_) | E::LinearSolve(_) => CliError::Solver(e),
            E::Io(io) => CliError::Output(io.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

/// Faults the selftest can be asked to inject, to prove it notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Flip the sign of the flux map `A`.
    AMapSign,
}

#[derive(Debug, Parser)]
#[command(name = "plab", version, about = "p-Laplacian regularity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for ball and parameter-row loops.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write whitespace-separated tables for gnuplot.
    #[arg(long, global = true)]
    pub plot_tables: bool,
    #[arg(long, global = true, hide = true, value_enum)]
    pub inject_fault: Option<Fault>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the configured p-Poisson problem and dump the fields.
    Solve,
    /// Measure oscillation decay on the configured balls.
    Decay,
    /// Estimate Besov and Triebel-Lizorkin seminorms.
    Besov,
    /// Compare the flux seminorm with the forcing seminorm.
    Transfer,
    /// List closed-form solutions, or sample the configured boundary data.
    Catalogue,
    /// Run the built-in invariant checks.
    Selftest,
}

/// Global flags after parsing.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub seed: Option<u64>,
    pub plot_tables: bool,
    pub fault: Option<Fault>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let opts = RunOptions {
        out: cli.out,
        jobs: cli.jobs.max(1),
        seed: cli.seed,
        plot_tables: cli.plot_tables,
        fault: cli.inject_fault,
    };
    match cli.command {
        Command::Selftest => selftest::run(opts.fault),
        Command::Catalogue if cli.config.is_none() => {
            print!("{}", commands::catalogue_listing());
            Ok(())
        }
        cmd => {
            let path = cli
                .config
                .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
            let mut loaded = ExperimentConfig::load(&path)?;
            if let Some(seed) = opts.seed {
                loaded.config.seed = Some(seed);
            }
            loaded.config.validate(&loaded.base_dir)?;
            let out = match &opts.out {
                Some(dir) => dir.clone(),
                None => loaded.base_dir.join(&loaded.config.output_dir),
            };
            std::fs::create_dir_all(&out)?;
            let ctx = commands::Context {
                loaded: &loaded,
                out: &out,
                opts: &opts,
            };
            match cmd {
                Command::Solve => commands::solve(&ctx),
                Command::Decay => commands::decay(&ctx),
                Command::Besov => commands::besov(&ctx),
                Command::Transfer => commands::transfer(&ctx),
                Command::Catalogue => commands::catalogue(&ctx),
                Command::Selftest => unreachable!(),
            }
        }
    }
}
