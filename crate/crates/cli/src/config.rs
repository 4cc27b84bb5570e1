//! Experiment configuration: a JSON file, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;
use spectral_score::oracles::Oracle;
use spectral_score::spectral::{RankRule, SigmaRule};

use crate::args::Overrides;
use crate::error::{CliError, CliResult};

pub const ESTIMATORS: [&str; 3] = ["ssge", "stein", "stein_plus"];
pub const PRESETS: [&str; 5] = ["normal", "normal2d", "gmm2", "gmm2_2d", "banana"];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub estimator: Option<String>,
    pub sigma: Option<SigmaField>,
    pub rank: Option<RankField>,
    pub eta: Option<f64>,
    pub target: Option<TargetField>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub eval: Option<EvalSpec>,
    pub out: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
    pub hmc: Option<HmcSpec>,
    pub entropy: Option<EntropySpec>,
    /// Record wall-clock time in summaries.
    pub timing: Option<bool>,
}

/// `"auto"` or a positive bandwidth.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SigmaField {
    Value(f64),
    Text(String),
}

/// Exactly one of `j` and `r_bar`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankField {
    pub j: Option<usize>,
    pub r_bar: Option<f64>,
}

/// An inline oracle, a preset name, or a path to a sample CSV.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TargetField {
    Oracle(Oracle),
    Name(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalSpec {
    /// Even 1-D grid, scored with `q`-weights.
    Grid { lo: f64, hi: f64, n: usize },
    /// Fresh draws from the target, plain average.
    Draws { n: usize },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub m: Option<Vec<usize>>,
    pub j: Option<Vec<usize>>,
    pub r_bar: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    /// Shorthand for `seeds = [0, 1, …, n_seeds − 1]`.
    pub n_seeds: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HmcSpec {
    pub fit_samples: Option<usize>,
    pub repeats: Option<usize>,
    pub iterations: Option<usize>,
    pub step_size_range: Option<(f64, f64)>,
    pub n_leapfrog_range: Option<(usize, usize)>,
    pub estimators: Option<Vec<String>>,
    pub traces: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    /// `(μ₁ … μ_d, s₁ … s_d)`.
    pub phi: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub n_seeds: Option<usize>,
    pub fresh_samples: Option<bool>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Loads `--config` if given and applies the remaining flags on top.
    pub fn load(flags: &Overrides) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(flags)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, flags: &Overrides) -> CliResult<()> {
        if let Some(s) = flags.seed {
            self.seed = Some(s);
        }
        if let Some(o) = &flags.out {
            self.out = Some(o.clone());
        }
        if let Some(e) = &flags.estimator {
            self.estimator = Some(e.clone());
        }
        if let Some(m) = flags.m {
            self.m = Some(m);
        }
        if let Some(j) = flags.rank_j {
            self.rank = Some(RankField { j: Some(j), r_bar: None });
        }
        if let Some(r) = flags.rank_rbar {
            self.rank = Some(RankField { j: None, r_bar: Some(r) });
        }
        if flags.timing {
            self.timing = Some(true);
        }
        if flags.traces {
            self.hmc.get_or_insert_with(HmcSpec::default).traces = Some(true);
        }
        if let Some(e) = flags.eta {
            self.eta = Some(e);
        }
        if let Some(s) = &flags.sigma {
            self.sigma = Some(match s.parse::<f64>() {
                Ok(v) => SigmaField::Value(v),
                Err(_) => SigmaField::Text(s.clone()),
            });
        }
        if let Some(t) = &flags.target {
            self.target = Some(if t.trim_start().starts_with('{') {
                let o: Oracle = serde_json::from_str(t).map_err(|e| CliError::config(format!("--target: {e}")))?;
                TargetField::Oracle(o)
            } else {
                TargetField::Name(t.clone())
            });
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("ssge-out"))
    }

    pub fn estimator(&self) -> CliResult<&str> {
        let e = self.estimator.as_deref().unwrap_or("ssge");
        if ESTIMATORS.contains(&e) {
            Ok(e)
        } else {
            Err(CliError::config(format!("unknown estimator {e:?}; valid: {}", ESTIMATORS.join(", "))))
        }
    }

    pub fn sigma_rule(&self) -> CliResult<SigmaRule> {
        match &self.sigma {
            None => Ok(SigmaRule::Median),
            Some(SigmaField::Text(t)) if t == "auto" => Ok(SigmaRule::Median),
            Some(SigmaField::Value(v)) if v.is_finite() && *v > 0.0 => Ok(SigmaRule::Fixed(*v)),
            Some(SigmaField::Value(v)) => Err(CliError::config(format!("sigma must be positive, got {v}"))),
            Some(SigmaField::Text(t)) => Err(CliError::config(format!("sigma must be \"auto\" or a number, got {t:?}"))),
        }
    }

    /// The SSGE rank rule; `default` applies when none is configured.
    pub fn rank_rule(&self, default: RankRule) -> CliResult<RankRule> {
        match &self.rank {
            None => Ok(default),
            Some(r) => rank_from_parts(r.j, r.r_bar),
        }
    }

    /// The ridge coefficient. Required when a Stein variant is the
    /// configured estimator; otherwise `default` fills in.
    pub fn eta(&self, default: f64) -> CliResult<f64> {
        let eta = match (self.eta, self.estimator()?) {
            (Some(e), _) => e,
            (None, "stein" | "stein_plus") => {
                return Err(CliError::config("eta is required for the stein and stein_plus estimators"))
            }
            (None, _) => default,
        };
        if !(eta.is_finite() && eta > 0.0) {
            return Err(CliError::config(format!("eta must be positive, got {eta}")));
        }
        Ok(eta)
    }

    pub fn target(&self, default: &str) -> CliResult<Target> {
        match &self.target {
            None => Target::from_name(default),
            Some(TargetField::Oracle(o)) => {
                o.validate().map_err(|e| CliError::config(format!("target: {e}")))?;
                Ok(Target::Oracle { name: "custom".into(), oracle: o.clone() })
            }
            Some(TargetField::Name(n)) => Target::from_name(n),
        }
    }
}

pub fn rank_from_parts(j: Option<usize>, r_bar: Option<f64>) -> CliResult<RankRule> {
    match (j, r_bar) {
        (Some(j), None) if j >= 1 => Ok(RankRule::Fixed(j)),
        (Some(j), None) => Err(CliError::config(format!("rank j must be at least 1, got {j}"))),
        (None, Some(r)) if r > 0.0 && r <= 1.0 => Ok(RankRule::Threshold(r)),
        (None, Some(r)) => Err(CliError::config(format!("rank r_bar must lie in (0, 1], got {r}"))),
        _ => Err(CliError::config("rank must set exactly one of j and r_bar")),
    }
}

pub fn rank_label(rule: RankRule) -> String {
    match rule {
        RankRule::Fixed(j) => format!("j={j}"),
        RankRule::Threshold(r) => format!("r_bar={r}"),
    }
}

/// What the estimators are fitted on.
#[derive(Debug, Clone)]
pub enum Target {
    Oracle { name: String, oracle: Oracle },
    /// Samples read from a CSV; no ground truth.
    Data { name: String, samples: DMatrix<f64> },
}

impl Target {
    pub fn from_name(name: &str) -> CliResult<Self> {
        let oracle = match name {
            "normal" => Oracle::standard_normal(1),
            "normal2d" => Oracle::standard_normal(2),
            "gmm2" => Oracle::Gmm2 { weights: [0.5, 0.5], means: [vec![-2.0], vec![2.0]], std: vec![1.0] },
            "gmm2_2d" => Oracle::Gmm2 {
                weights: [0.3, 0.7],
                means: [vec![-1.5, 0.0], vec![1.5, 1.0]],
                std: vec![0.8, 0.8],
            },
            "banana" => Oracle::default_banana(),
            path if path.ends_with(".csv") || Path::new(path).is_file() => {
                return Ok(Target::Data { name: path.into(), samples: read_samples_csv(Path::new(path))? })
            }
            other => {
                return Err(CliError::config(format!(
                    "unknown target {other:?}; use a preset ({}), inline JSON, or a .csv path",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Target::Oracle { name: name.into(), oracle })
    }

    pub fn name(&self) -> &str {
        match self {
            Target::Oracle { name, .. } | Target::Data { name, .. } => name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Target::Oracle { oracle, .. } => oracle.dim(),
            Target::Data { samples, .. } => samples.ncols(),
        }
    }

    pub fn oracle(&self) -> Option<&Oracle> {
        match self {
            Target::Oracle { oracle, .. } => Some(oracle),
            Target::Data { .. } => None,
        }
    }

    pub fn require_oracle(&self, command: &str) -> CliResult<&Oracle> {
        self.oracle()
            .ok_or_else(|| CliError::config(format!("{command} needs an analytic target, not a sample file")))
    }
}

/// Reads a sample file with header `x1,…,xd`.
pub fn read_samples_csv(path: &Path) -> CliResult<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() {
        return Err(CliError::config(format!("{}: empty header", path.display())));
    }
    for (k, name) in header.iter().enumerate() {
        let expected = format!("x{}", k + 1);
        if name.trim() != expected {
            return Err(CliError::config(format!(
                "{}: header column {} is {name:?}, expected {expected:?}",
                path.display(),
                k + 1
            )));
        }
    }
    let d = header.len();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::config(format!("{}: row {}, column x{}: not a number: {field:?}", path.display(), row + 1, k + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::config(format!("{}: row {}, column x{}: not finite", path.display(), row + 1, k + 1)));
            }
            values.push(v);
        }
    }
    let m = values.len() / d;
    if m == 0 {
        return Err(CliError::config(format!("{}: no samples", path.display())));
    }
    Ok(DMatrix::from_row_slice(m, d, &values))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::config(format!("{}: malformed CSV: {other:?}", path.display())),
    }
}
