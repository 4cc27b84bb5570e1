use std::path::PathBuf;

use rayon::prelude::*;
use spectral_score::oracles::Oracle;
use spectral_score::spectral::RankRule;
use spectral_score::ssge::{ScoreEstimator, SsgeConfig};

use crate::commands::fit_eval::{eval_points, score_error};
use crate::config::{rank_from_parts, rank_label, ExperimentConfig, SweepSpec, Target};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, OutDir};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const MEANS_FILE: &str = "sweep_means.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub target: String,
    pub m: usize,
    pub rank: RankRule,
    pub j: usize,
    pub seed: u64,
    pub weighted_mse: f64,
    pub mu_j: f64,
    pub delta_j: f64,
}

/// The swept axes, in output order.
#[derive(Debug, Clone)]
pub struct Grid {
    pub m: Vec<usize>,
    pub ranks: Vec<RankRule>,
    pub seeds: Vec<u64>,
}

impl Grid {
    pub fn from_config(cfg: &ExperimentConfig) -> CliResult<Self> {
        let spec = cfg.sweep.clone().unwrap_or_default();
        let SweepSpec { m, j, r_bar, seeds, n_seeds } = spec;
        let m = m.unwrap_or_else(|| vec![cfg.m.unwrap_or(100)]);
        let ranks = match (j, r_bar) {
            (Some(_), Some(_)) => return Err(CliError::config("sweep sets both j and r_bar; choose one")),
            (Some(js), None) => js.iter().map(|&j| rank_from_parts(Some(j), None)).collect::<CliResult<_>>()?,
            (None, Some(rs)) => rs.iter().map(|&r| rank_from_parts(None, Some(r))).collect::<CliResult<_>>()?,
            (None, None) => vec![cfg.rank_rule(RankRule::Threshold(0.95))?],
        };
        let seeds = match (seeds, n_seeds) {
            (Some(_), Some(_)) => return Err(CliError::config("sweep sets both seeds and n_seeds; choose one")),
            (Some(s), None) => s,
            (None, Some(n)) => (0..n).collect(),
            (None, None) => vec![cfg.seed()],
        };
        let grid = Grid { m, ranks, seeds };
        if grid.m.is_empty() || grid.ranks.is_empty() || grid.seeds.is_empty() {
            return Err(CliError::config("sweep lists over m, rank and seeds must be nonempty"));
        }
        if let Some(&bad) = grid.m.iter().find(|&&m| m < 2) {
            return Err(CliError::config(format!("sweep sample size {bad} is below 2")));
        }
        Ok(grid)
    }
}

/// Every `(m, rank, seed)` cell in configuration order. Cells run in
/// parallel; each one's result depends only on its own coordinates.
pub fn compute(cfg: &ExperimentConfig) -> CliResult<Vec<SweepRow>> {
    let grid = Grid::from_config(cfg)?;
    let target = cfg.target("normal")?;
    let oracle = target.require_oracle("sweep")?.clone();
    let sigma = cfg.sigma_rule()?;
    let mut cells: Vec<(usize, RankRule, u64)> = Vec::new();
    for &m in &grid.m {
        for &r in &grid.ranks {
            cells.extend(grid.seeds.iter().map(|&s| (m, r, s)));
        }
    }
    cells
        .par_iter()
        .map(|&(m, rank, seed)| cell(&target, &oracle, cfg, m, rank, seed, SsgeConfig { sigma, rank }))
        .collect()
}

fn cell(
    target: &Target,
    oracle: &Oracle,
    cfg: &ExperimentConfig,
    m: usize,
    rank: RankRule,
    seed: u64,
    ssge: SsgeConfig,
) -> CliResult<SweepRow> {
    let samples = oracle.sample(m, seed);
    let points = eval_points(cfg.eval, target, &samples, seed)?;
    let est = ScoreEstimator::fit(&samples, &ssge)?;
    let err = score_error(target, &points, &est.score(points.points())).expect("oracle targets have ground truth");
    let basis = est.basis();
    Ok(SweepRow {
        target: target.name().into(),
        m,
        rank,
        j: basis.rank(),
        seed,
        weighted_mse: err,
        mu_j: basis.mu()[basis.rank() - 1],
        delta_j: basis.eigengap(),
    })
}

/// Mean and sample standard deviation of the error per `(m, rank)`, in
/// first-appearance order.
pub fn means(rows: &[SweepRow]) -> Vec<(usize, RankRule, usize, f64, f64)> {
    let mut keys: Vec<(usize, RankRule)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.m, r.rank)) {
            keys.push((r.m, r.rank));
        }
    }
    keys.into_iter()
        .map(|(m, rank)| {
            let v: Vec<f64> =
                rows.iter().filter(|r| r.m == m && r.rank == rank).map(|r| r.weighted_mse).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (m, rank, v.len(), mean, std)
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Vec<PathBuf>> {
    let rows = compute(cfg)?;
    let header: Vec<String> =
        ["target", "M", "rank", "J", "seed", "weighted_mse", "mu_J", "delta_J"].map(String::from).to_vec();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.target.clone(),
                r.m.to_string(),
                rank_label(r.rank),
                r.j.to_string(),
                r.seed.to_string(),
                fmt_f64(r.weighted_mse),
                fmt_f64(r.mu_j),
                fmt_f64(r.delta_j),
            ]
        })
        .collect();
    let mean_header: Vec<String> =
        ["target", "M", "rank", "n_seeds", "mean_weighted_mse", "std_weighted_mse"].map(String::from).to_vec();
    let target = rows.first().map(|r| r.target.clone()).unwrap_or_default();
    let mean_rows: Vec<Vec<String>> = means(&rows)
        .into_iter()
        .map(|(m, rank, n, mean, std)| {
            vec![target.clone(), m.to_string(), rank_label(rank), n.to_string(), fmt_f64(mean), fmt_f64(std)]
        })
        .collect();
    let out = OutDir::create(&cfg.out_dir())?;
    Ok(vec![out.write_csv(SWEEP_FILE, &header, &body)?, out.write_csv(MEANS_FILE, &mean_header, &mean_rows)?])
}
