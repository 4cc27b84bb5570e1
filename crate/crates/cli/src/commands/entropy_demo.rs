use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use spectral_score::entropy::{self, EntropyConfig, LocationScale};
use spectral_score::rng::derive_seed;
use spectral_score::spectral::RankRule;
use spectral_score::ssge::SsgeConfig;

use crate::config::{rank_label, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

pub const REPORT_FILE: &str = "entropy.json";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub family: String,
    pub phi: Vec<f64>,
    pub n: usize,
    pub n_seeds: usize,
    pub rank_rule: String,
    pub fresh_samples: bool,
    /// Mean over seeds of the SSGE-based gradient.
    pub estimate: Vec<f64>,
    /// Standard error of that mean; null for a single seed.
    pub std_error: Vec<Option<f64>>,
    pub analytic: Vec<f64>,
    pub abs_error: Vec<f64>,
    /// Same draws and averaging with the exact score in place of SSGE.
    pub oracle_estimate: Vec<f64>,
}

fn mean_and_se(rows: &[Vec<f64>], p: usize) -> (f64, Option<f64>) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[p]).sum::<f64>() / n;
    let se = (rows.len() > 1)
        .then(|| (rows.iter().map(|r| (r[p] - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt());
    (mean, se)
}

pub fn compute(cfg: &ExperimentConfig) -> CliResult<Report> {
    let spec = cfg.entropy.clone().unwrap_or_default();
    let phi = spec.phi.unwrap_or_else(|| vec![0.0, 1.0]);
    if phi.is_empty() || !phi.len().is_multiple_of(2) {
        return Err(CliError::config("phi must list d means followed by d scales"));
    }
    let d = phi.len() / 2;
    if phi[d..].iter().any(|s| !(s.is_finite() && *s > 0.0)) || phi[..d].iter().any(|m| !m.is_finite()) {
        return Err(CliError::config("scales in phi must be positive and means finite"));
    }
    let n = cfg.m.or(spec.n).unwrap_or(100);
    if n < 2 {
        return Err(CliError::config(format!("entropy-demo needs n >= 2 noise draws, got {n}")));
    }
    let n_seeds = spec.n_seeds.unwrap_or(50);
    if n_seeds == 0 {
        return Err(CliError::config("n_seeds must be at least 1"));
    }
    let rank = cfg.rank_rule(RankRule::Threshold(0.95))?;
    let ssge = SsgeConfig { sigma: cfg.sigma_rule()?, rank };
    let fresh = spec.fresh_samples.unwrap_or(false);
    let family = LocationScale { dim: d };
    let base = cfg.seed();

    let runs: Vec<CliResult<(Vec<f64>, Vec<f64>)>> = (0..n_seeds)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(base, k as u64);
            let est = entropy::entropy_grad(&family, &phi, &EntropyConfig { n_noise: n, seed, ssge, fresh_samples: fresh })?;
            let exact = entropy::entropy_grad_with_score(&family, &phi, n, seed, |x| {
                x.map_with_location(|_, c, v| -(v - phi[c]) / (phi[d + c] * phi[d + c]))
            })?;
            Ok((est, exact))
        })
        .collect();
    let mut estimates = Vec::with_capacity(n_seeds);
    let mut exact = Vec::with_capacity(n_seeds);
    for r in runs {
        let (e, x) = r?;
        estimates.push(e);
        exact.push(x);
    }
    let analytic = family.analytic_entropy_grad(&phi);
    let (estimate, std_error): (Vec<f64>, Vec<Option<f64>>) = (0..2 * d).map(|p| mean_and_se(&estimates, p)).unzip();
    let oracle_estimate: Vec<f64> = (0..2 * d).map(|p| mean_and_se(&exact, p).0).collect();
    let abs_error = estimate.iter().zip(&analytic).map(|(e, a)| (e - a).abs()).collect();
    Ok(Report {
        family: "location_scale".into(),
        phi,
        n,
        n_seeds,
        rank_rule: rank_label(rank),
        fresh_samples: fresh,
        estimate,
        std_error,
        analytic,
        abs_error,
        oracle_estimate,
    })
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let report = compute(cfg)?;
    let out = OutDir::create(&cfg.out_dir())?;
    Ok(vec![out.write_json(REPORT_FILE, &report)?])
}
