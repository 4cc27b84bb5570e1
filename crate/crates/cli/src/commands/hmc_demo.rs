use std::path::PathBuf;

use spectral_score::hmc::{self, ComparisonConfig, ComparisonRow, HmcConfig, HmcTrace, ScoreSource};
use spectral_score::spectral::{RankRule, SigmaRule};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, OutDir};

pub const TABLE_FILE: &str = "hmc_acceptance.csv";
pub const REPEATS_FILE: &str = "hmc_repeats.csv";
pub const TRACES_FILE: &str = "hmc_traces.csv";

pub const SOURCES: [&str; 4] = ["true", "ssge", "stein_plus", "zero"];

fn parse_sources(names: &[String], r_bar: f64, eta: f64) -> CliResult<Vec<ScoreSource>> {
    if names.is_empty() {
        return Err(CliError::config(format!("no estimators given; valid: {}", SOURCES.join(", "))));
    }
    names
        .iter()
        .map(|n| match n.trim() {
            "true" => Ok(ScoreSource::True),
            "ssge" => Ok(ScoreSource::Ssge { r_bar }),
            "stein_plus" => Ok(ScoreSource::SteinPlus { eta }),
            "zero" => Ok(ScoreSource::Zero),
            other => Err(CliError::config(format!("unknown estimator {other:?}; valid: {}", SOURCES.join(", ")))),
        })
        .collect()
}

pub fn comparison_config(cfg: &ExperimentConfig) -> CliResult<ComparisonConfig> {
    let spec = cfg.hmc.clone().unwrap_or_default();
    let defaults = ComparisonConfig::default();
    let names: Vec<String> = match (&cfg.estimator, &spec.estimators) {
        (Some(flag), _) => flag.split(',').map(String::from).collect(),
        (None, Some(list)) => list.clone(),
        (None, None) => SOURCES.map(String::from).to_vec(),
    };
    let r_bar = match cfg.rank_rule(RankRule::Threshold(0.95))? {
        RankRule::Threshold(r) => r,
        RankRule::Fixed(_) => return Err(CliError::config("hmc-demo selects the SSGE rank by r_bar, not j")),
    };
    if cfg.sigma_rule()? != SigmaRule::Median {
        return Err(CliError::config("hmc-demo always uses the median bandwidth"));
    }
    let eta = cfg.eta.unwrap_or(0.001);
    if !(eta.is_finite() && eta > 0.0) {
        return Err(CliError::config(format!("eta must be positive, got {eta}")));
    }
    let hmc = HmcConfig {
        step_size_range: spec.step_size_range.unwrap_or(defaults.hmc.step_size_range),
        n_leapfrog_range: spec.n_leapfrog_range.unwrap_or(defaults.hmc.n_leapfrog_range),
        n_iterations: spec.iterations.unwrap_or(defaults.hmc.n_iterations),
        seed: cfg.seed(),
    };
    hmc.validate().map_err(|e| CliError::config(e.to_string()))?;
    let out = ComparisonConfig {
        fit_samples: cfg.m.or(spec.fit_samples).unwrap_or(defaults.fit_samples),
        n_repeats: spec.repeats.unwrap_or(defaults.n_repeats),
        hmc,
        sources: parse_sources(&names, r_bar, eta)?,
    };
    if out.n_repeats == 0 || out.fit_samples < 2 {
        return Err(CliError::config("hmc-demo needs repeats >= 1 and at least 2 fit samples"));
    }
    Ok(out)
}

pub fn compute(cfg: &ExperimentConfig) -> CliResult<(Vec<ComparisonRow>, Vec<Vec<HmcTrace>>)> {
    let comparison = comparison_config(cfg)?;
    let target = cfg.target("banana")?;
    let oracle = target.require_oracle("hmc-demo")?;
    Ok(hmc::acceptance_comparison_with_traces(oracle, &comparison)?)
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let (rows, traces) = compute(cfg)?;
    let out = OutDir::create(&cfg.out_dir())?;
    let mut written = Vec::new();

    let header: Vec<String> =
        ["estimator", "mean_acceptance", "std_acceptance", "std_error", "n_repeats"].map(String::from).to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.estimator.name().into(),
                fmt_f64(r.mean),
                fmt_f64(r.std),
                fmt_f64(r.standard_error()),
                r.ratios.len().to_string(),
            ]
        })
        .collect();
    written.push(out.write_csv(TABLE_FILE, &header, &body)?);

    let header: Vec<String> =
        ["estimator", "repeat", "acceptance_ratio", "non_finite_proposals"].map(String::from).to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .zip(&traces)
        .flat_map(|(row, chains)| {
            chains.iter().enumerate().map(move |(k, t)| {
                vec![row.estimator.name().into(), k.to_string(), fmt_f64(t.acceptance_ratio), t.non_finite_proposals.to_string()]
            })
        })
        .collect();
    written.push(out.write_csv(REPEATS_FILE, &header, &body)?);

    if cfg.hmc.as_ref().and_then(|h| h.traces).unwrap_or(false) {
        let d = traces.first().and_then(|c| c.first()).map_or(0, |t| t.states.ncols());
        let mut header: Vec<String> = ["estimator", "repeat", "iteration", "accepted"].map(String::from).to_vec();
        header.extend((1..=d).map(|k| format!("x{k}")));
        let mut body = Vec::new();
        for (row, chains) in rows.iter().zip(&traces) {
            for (k, t) in chains.iter().enumerate() {
                for it in 0..t.states.nrows() {
                    let mut line =
                        vec![row.estimator.name().to_string(), k.to_string(), it.to_string(), t.accepted[it].to_string()];
                    line.extend(t.states.row(it).iter().map(|v| fmt_f64(*v)));
                    body.push(line);
                }
            }
        }
        written.push(out.write_csv(TRACES_FILE, &header, &body)?);
    }
    Ok(written)
}
