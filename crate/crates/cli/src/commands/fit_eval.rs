use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use spectral_score::eval;
use spectral_score::rng::derive_seed;
use spectral_score::spectral::RankRule;
use spectral_score::ssge::{ScoreEstimator, SsgeConfig};
use spectral_score::stein;

use crate::config::{rank_label, EvalSpec, ExperimentConfig, Target};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, OutDir};

pub const GRID_FILE: &str = "fit_eval_grid.csv";
pub const SAMPLES_FILE: &str = "fit_eval_samples.csv";
pub const SUMMARY_FILE: &str = "fit_eval_summary.json";

/// Where the fitted estimators are compared.
#[derive(Debug, Clone)]
pub enum EvalPoints {
    /// Even grid, errors weighted by the target density.
    Grid(DMatrix<f64>),
    /// Draws from the target; errors averaged plainly.
    Draws(DMatrix<f64>),
    /// The fitting samples themselves (sample-file targets beyond 1-D).
    Samples(DMatrix<f64>),
}

impl EvalPoints {
    pub fn points(&self) -> &DMatrix<f64> {
        match self {
            EvalPoints::Grid(p) | EvalPoints::Draws(p) | EvalPoints::Samples(p) => p,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            EvalPoints::Grid(_) => "grid",
            EvalPoints::Draws(_) => "draws",
            EvalPoints::Samples(_) => "samples",
        }
    }
}

pub fn eval_points(spec: Option<EvalSpec>, target: &Target, samples: &DMatrix<f64>, seed: u64) -> CliResult<EvalPoints> {
    let d = target.dim();
    let spec = spec.unwrap_or(match (d, target) {
        (1, _) => EvalSpec::Grid { lo: -4.0, hi: 4.0, n: 201 },
        (_, Target::Oracle { .. }) => EvalSpec::Draws { n: 1000 },
        (_, Target::Data { .. }) => return Ok(EvalPoints::Samples(samples.clone())),
    });
    match spec {
        EvalSpec::Grid { lo, hi, n } => {
            if d != 1 {
                return Err(CliError::config(format!("a grid needs a 1-D target, this one is {d}-D")));
            }
            if n < 2 || lo >= hi || !lo.is_finite() || !hi.is_finite() {
                return Err(CliError::config("grid needs n >= 2 and lo < hi"));
            }
            Ok(EvalPoints::Grid(eval::linspace(lo, hi, n)))
        }
        EvalSpec::Draws { n } => {
            let oracle = target.require_oracle("evaluating on fresh draws")?;
            if n == 0 {
                return Err(CliError::config("draws needs n >= 1"));
            }
            Ok(EvalPoints::Draws(oracle.sample(n, derive_seed(seed, 1))))
        }
    }
}

/// Error of `estimate` against the truth: `q`-weighted on a grid, a plain
/// mean otherwise. `None` without ground truth.
pub fn score_error(target: &Target, at: &EvalPoints, estimate: &DMatrix<f64>) -> Option<f64> {
    let oracle = target.oracle()?;
    let truth = oracle.true_score(at.points());
    Some(match at {
        EvalPoints::Grid(p) => eval::weighted_mse(estimate, &truth, &oracle.log_density_unnormalized(p)),
        EvalPoints::Draws(_) | EvalPoints::Samples(_) => eval::mse(estimate, &truth),
    })
}

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct Summary {
    pub target: String,
    pub dim: usize,
    pub m: usize,
    pub seed: u64,
    pub estimator: String,
    pub rank_rule: String,
    pub eta: f64,
    pub sigma_used: f64,
    pub J_selected: usize,
    /// Set when the selected rank collapsed to a single eigenfunction.
    pub rank_warning: Option<String>,
    pub eval_kind: String,
    pub eval_points: usize,
    pub weighted_mse: Option<f64>,
    pub ssge_weighted_mse: Option<f64>,
    pub stein_plus_weighted_mse: Option<f64>,
    /// Stein estimates at the fitting samples against the true score there.
    pub stein_sample_mse: Option<f64>,
    /// Gram-matrix eigenvalues, descending.
    pub eigenvalue_spectrum: Vec<f64>,
    pub mu_J: f64,
    pub delta_J: f64,
    pub runtime_ms: Option<f64>,
}

pub struct FitEval {
    pub target: Target,
    pub points: EvalPoints,
    pub samples: DMatrix<f64>,
    pub truth: Option<DMatrix<f64>>,
    pub ssge: DMatrix<f64>,
    pub stein_plus: DMatrix<f64>,
    pub stein_at_samples: DMatrix<f64>,
    pub summary: Summary,
}

pub fn compute(cfg: &ExperimentConfig) -> CliResult<FitEval> {
    let started = Instant::now();
    let estimator = cfg.estimator()?.to_string();
    let target = cfg.target("normal")?;
    let seed = cfg.seed();
    let sigma = cfg.sigma_rule()?;
    let rank = cfg.rank_rule(RankRule::Threshold(0.95))?;
    let eta = cfg.eta(0.1)?;
    let samples = match &target {
        Target::Oracle { oracle, .. } => oracle.sample(cfg.m.unwrap_or(100), seed),
        Target::Data { samples, .. } => samples.clone(),
    };
    let points = eval_points(cfg.eval, &target, &samples, seed)?;

    let fitted = ScoreEstimator::fit(&samples, &SsgeConfig { sigma, rank })?;
    let ssge = fitted.score(points.points());
    let stein_plus = stein::stein_plus(&samples, eta, sigma, points.points())?;
    let stein_fit = stein::stein_fit(&samples, eta, sigma)?;

    let ssge_err = score_error(&target, &points, &ssge);
    let plus_err = score_error(&target, &points, &stein_plus);
    let sample_err = target.oracle().map(|o| eval::mse(&stein_fit.g_hat, &o.true_score(&samples)));
    let headline = match estimator.as_str() {
        "ssge" => ssge_err,
        "stein_plus" => plus_err,
        _ => sample_err,
    };
    let basis = fitted.basis();
    let j = basis.rank();
    let rank_warning = (j == 1).then(|| "selected rank J = 1: the estimate uses a single eigenfunction".to_string());
    let summary = Summary {
        target: target.name().into(),
        dim: target.dim(),
        m: samples.nrows(),
        seed,
        estimator,
        rank_rule: rank_label(rank),
        eta,
        sigma_used: basis.sigma().value(),
        J_selected: j,
        rank_warning,
        eval_kind: points.kind().into(),
        eval_points: points.points().nrows(),
        weighted_mse: headline,
        ssge_weighted_mse: ssge_err,
        stein_plus_weighted_mse: plus_err,
        stein_sample_mse: sample_err,
        eigenvalue_spectrum: basis.spectrum().to_vec(),
        mu_J: basis.mu()[j - 1],
        delta_J: basis.eigengap(),
        runtime_ms: cfg.timing.unwrap_or(false).then(|| started.elapsed().as_secs_f64() * 1e3),
    };
    Ok(FitEval {
        truth: target.oracle().map(|o| o.true_score(points.points())),
        points,
        samples,
        ssge,
        stein_plus,
        stein_at_samples: stein_fit.g_hat,
        summary,
        target,
    })
}

fn column_names(stem: &str, d: usize) -> Vec<String> {
    if d == 1 {
        vec![stem.into()]
    } else {
        (1..=d).map(|k| format!("{stem}_{k}")).collect()
    }
}

fn push_row(row: &mut Vec<String>, m: Option<&DMatrix<f64>>, n: usize, d: usize) {
    for c in 0..d {
        row.push(m.map_or_else(String::new, |m| fmt_f64(m[(n, c)])));
    }
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let r = compute(cfg)?;
    let d = r.summary.dim;
    let x_cols: Vec<String> = if d == 1 { vec!["x".into()] } else { (1..=d).map(|k| format!("x{k}")).collect() };

    let mut header = x_cols.clone();
    for stem in ["true_score", "ssge", "stein_plus", "stein_at_samples"] {
        header.extend(column_names(stem, d));
    }
    let pts = r.points.points();
    let grid_rows: Vec<Vec<String>> = (0..pts.nrows())
        .map(|n| {
            let mut row = Vec::with_capacity(header.len());
            push_row(&mut row, Some(pts), n, d);
            push_row(&mut row, r.truth.as_ref(), n, d);
            push_row(&mut row, Some(&r.ssge), n, d);
            push_row(&mut row, Some(&r.stein_plus), n, d);
            // Stein has no out-of-sample values; see the samples file
            push_row(&mut row, None, n, d);
            row
        })
        .collect();

    let sample_truth = r.target.oracle().map(|o| o.true_score(&r.samples));
    let mut sample_header = x_cols;
    sample_header.extend(column_names("true_score", d));
    sample_header.extend(column_names("stein_at_samples", d));
    let sample_rows: Vec<Vec<String>> = (0..r.samples.nrows())
        .map(|n| {
            let mut row = Vec::new();
            push_row(&mut row, Some(&r.samples), n, d);
            push_row(&mut row, sample_truth.as_ref(), n, d);
            push_row(&mut row, Some(&r.stein_at_samples), n, d);
            row
        })
        .collect();

    if let Some(w) = &r.summary.rank_warning {
        eprintln!("warning: {w}");
    }
    let out = OutDir::create(&cfg.out_dir())?;
    Ok(vec![
        out.write_csv(GRID_FILE, &header, &grid_rows)?,
        out.write_csv(SAMPLES_FILE, &sample_header, &sample_rows)?,
        out.write_json(SUMMARY_FILE, &r.summary)?,
    ])
}
