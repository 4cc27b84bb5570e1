//! Command-line front end for `spectral-score`.
//!
//! Every subcommand reads an optional JSON config, applies flag overrides,
//! and writes CSV/JSON artifacts into an output directory. Output bytes
//! depend only on the config and seed.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use args::Command;
use config::ExperimentConfig;
use error::{CliError, CliResult};

pub const THREADS_ENV: &str = "SS_THREADS";

/// Runs a parsed command and returns the paths it wrote.
pub fn run(command: &Command) -> CliResult<Vec<PathBuf>> {
    match command {
        Command::FitEval(f) => commands::fit_eval::run(&ExperimentConfig::load(f)?),
        Command::Sweep(f) => commands::sweep::run(&ExperimentConfig::load(f)?),
        Command::HmcDemo(f) => commands::hmc_demo::run(&ExperimentConfig::load(f)?),
        Command::EntropyDemo(f) => commands::entropy_demo::run(&ExperimentConfig::load(f)?),
    }
}

/// Sizes the global thread pool from `SS_THREADS`, if set.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("{THREADS_ENV}: {e}")))
}
