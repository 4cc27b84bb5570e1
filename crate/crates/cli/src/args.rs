use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ssge", version, about = "Score estimation from samples with spectral Stein gradients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit SSGE and the Stein baselines once and evaluate them.
    FitEval(Overrides),
    /// Sweep SSGE over sample sizes, ranks and seeds.
    Sweep(Overrides),
    /// Compare HMC acceptance rates under true and estimated scores.
    HmcDemo(Overrides),
    /// Estimate the entropy gradient of a location-scale family.
    EntropyDemo(Overrides),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default `ssge-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `ssge`, `stein` or `stein_plus`; for hmc-demo a comma-separated
    /// subset of `true,ssge,stein_plus,zero`.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Number of fitting samples.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, conflicts_with = "rank_rbar")]
    pub rank_j: Option<usize>,
    #[arg(long)]
    pub rank_rbar: Option<f64>,
    /// Stein ridge coefficient. The commonly searched grid is
    /// {0.001, 0.01, 0.1, 1, 10, 100}.
    #[arg(long)]
    pub eta: Option<f64>,
    /// `auto` (median heuristic) or a bandwidth.
    #[arg(long)]
    pub sigma: Option<String>,
    /// Preset name, inline oracle JSON, or a sample CSV path.
    #[arg(long)]
    pub target: Option<String>,
    /// Record wall-clock time in summaries (makes output nondeterministic).
    #[arg(long)]
    pub timing: bool,
    /// hmc-demo: also write every chain state.
    #[arg(long)]
    pub traces: bool,
}
