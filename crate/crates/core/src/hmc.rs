//! Hamiltonian Monte Carlo with a pluggable score.
//!
//! The dynamics only see a score function, which may be exact or
//! estimated from samples. The Metropolis correction always uses the
//! target's own (unnormalized) log density, so with an inexact score the
//! chain still targets the right distribution and the acceptance ratio
//! measures how good the score is.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::oracles::Oracle;
use crate::spectral::{RankRule, SigmaRule};
use crate::ssge::{ScoreEstimator, SsgeConfig};
use crate::stein::SteinPlus;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    /// Per-iteration step size is uniform on this closed range.
    pub step_size_range: (f64, f64),
    /// Per-iteration leapfrog count is uniform on this inclusive range.
    pub n_leapfrog_range: (usize, usize),
    pub n_iterations: usize,
    pub seed: u64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self { step_size_range: (0.01, 0.1), n_leapfrog_range: (1, 10), n_iterations: 5000, seed: 0 }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.step_size_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidParameter(format!("step size range [{lo}, {hi}] must satisfy 0 < lo <= hi")));
        }
        let (lo, hi) = self.n_leapfrog_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidParameter(format!("leapfrog range [{lo}, {hi}] must satisfy 1 <= lo <= hi")));
        }
        Ok(())
    }
}

/// Leapfrog integration of `H(x, p) = −log q(x) + ½‖p‖²`.
pub fn leapfrog<S>(position: &[f64], momentum: &[f64], score: S, step: f64, n_steps: usize) -> (Vec<f64>, Vec<f64>)
where
    S: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = position.to_vec();
    let mut p = momentum.to_vec();
    let mut g = score(&x);
    for _ in 0..n_steps {
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step * gi;
        }
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += step * pi;
        }
        g = score(&x);
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi += 0.5 * step * gi;
        }
    }
    (x, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcTrace {
    /// One row per iteration; the initial state is not included.
    pub states: DMatrix<f64>,
    pub accepted: Vec<bool>,
    pub acceptance_ratio: f64,
    /// Proposals rejected because the log density was not finite there.
    pub non_finite_proposals: usize,
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

/// Runs one chain. Momentum is fully refreshed every iteration.
pub fn hmc_chain<S, L>(init: &[f64], score: S, log_density: L, config: &HmcConfig) -> Result<HmcTrace>
where
    S: Fn(&[f64]) -> Vec<f64>,
    L: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let d = init.len();
    let mut x = init.to_vec();
    let mut logp = log_density(&x);
    if !logp.is_finite() {
        return Err(Error::NonFiniteEnergy);
    }
    let mut r = rng::seeded(config.seed);
    let (step_lo, step_hi) = config.step_size_range;
    let (lf_lo, lf_hi) = config.n_leapfrog_range;

    let n = config.n_iterations;
    let mut states = DMatrix::zeros(n, d);
    let mut accepted = Vec::with_capacity(n);
    let mut non_finite = 0;
    for it in 0..n {
        let step = if step_lo == step_hi { step_lo } else { r.random_range(step_lo..=step_hi) };
        let n_steps = r.random_range(lf_lo..=lf_hi);
        let p0: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
        let u: f64 = r.random();

        let (xp, pp) = leapfrog(&x, &p0, &score, step, n_steps);
        let logp_new = log_density(&xp);
        let h0 = -logp + kinetic(&p0);
        let h1 = -logp_new + kinetic(&pp);
        let accept = if h1.is_finite() {
            u.ln() < h0 - h1
        } else {
            non_finite += 1;
            false
        };
        if accept {
            x = xp;
            logp = logp_new;
        }
        accepted.push(accept);
        states.row_mut(it).copy_from_slice(&x);
    }
    let acceptance_ratio = if n == 0 {
        0.0
    } else {
        accepted.iter().filter(|&&a| a).count() as f64 / n as f64
    };
    Ok(HmcTrace { states, accepted, acceptance_ratio, non_finite_proposals: non_finite })
}

/// Where the leapfrog dynamics get their score from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum ScoreSource {
    /// The target's exact score.
    True,
    /// SSGE with median bandwidth and eigenvalue-mass threshold `r_bar`.
    Ssge { r_bar: f64 },
    /// Stein⁺ with median bandwidth and ridge `eta`.
    SteinPlus { eta: f64 },
    /// Zero score: free flight, a lower-bound control.
    Zero,
}

impl ScoreSource {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreSource::True => "true",
            ScoreSource::Ssge { .. } => "ssge",
            ScoreSource::SteinPlus { .. } => "stein_plus",
            ScoreSource::Zero => "zero",
        }
    }
}

enum FittedScore<'a> {
    True(&'a Oracle),
    Ssge(ScoreEstimator),
    SteinPlus(SteinPlus),
    Zero(usize),
}

impl FittedScore<'_> {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            FittedScore::True(o) => o.score_at(x),
            FittedScore::Ssge(e) => e.score_at(x),
            FittedScore::SteinPlus(s) => s.predict_one(x),
            FittedScore::Zero(d) => vec![0.0; *d],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    /// Number of target draws each estimator is fitted on.
    pub fit_samples: usize,
    pub n_repeats: usize,
    pub hmc: HmcConfig,
    pub sources: Vec<ScoreSource>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            fit_samples: 200,
            n_repeats: 10,
            hmc: HmcConfig::default(),
            sources: vec![
                ScoreSource::True,
                ScoreSource::Ssge { r_bar: 0.95 },
                ScoreSource::SteinPlus { eta: 0.001 },
                ScoreSource::Zero,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub estimator: ScoreSource,
    /// Acceptance ratio of each repeat, in repeat order.
    pub ratios: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across repeats (zero for one repeat).
    pub std: f64,
}

impl ComparisonRow {
    pub fn standard_error(&self) -> f64 {
        self.std / (self.ratios.len() as f64).sqrt()
    }

    /// `√(se_a² + se_b²)` for comparing two rows' means.
    pub fn pooled_standard_error(&self, other: &ComparisonRow) -> f64 {
        self.standard_error().hypot(other.standard_error())
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-repeat seeds: fitting draws, chain start, chain randomness.
fn repeat_seeds(base: u64, repeat: usize) -> (u64, u64, u64) {
    let t = 3 * repeat as u64;
    (rng::derive_seed(base, t), rng::derive_seed(base, t + 1), rng::derive_seed(base, t + 2))
}

/// Fits every score source on the same draws each repeat, runs one chain
/// per source from a common start with common randomness, and summarizes
/// the acceptance ratios.
pub fn acceptance_comparison(target: &Oracle, config: &ComparisonConfig) -> Result<Vec<ComparisonRow>> {
    acceptance_comparison_with_traces(target, config).map(|(rows, _)| rows)
}

/// As [`acceptance_comparison`], also returning every chain, indexed
/// `[source][repeat]`.
pub fn acceptance_comparison_with_traces(
    target: &Oracle,
    config: &ComparisonConfig,
) -> Result<(Vec<ComparisonRow>, Vec<Vec<HmcTrace>>)> {
    target.validate()?;
    config.hmc.validate()?;
    if config.n_repeats == 0 {
        return Err(Error::InvalidParameter("n_repeats must be at least 1".into()));
    }
    if config.sources.is_empty() {
        return Err(Error::InvalidParameter("no score sources requested".into()));
    }
    let d = target.dim();
    let jobs: Vec<(usize, usize)> =
        (0..config.n_repeats).flat_map(|r| (0..config.sources.len()).map(move |s| (r, s))).collect();

    let traces: Vec<Result<HmcTrace>> = jobs
        .par_iter()
        .map(|&(repeat, s)| {
            let (fit_seed, init_seed, chain_seed) = repeat_seeds(config.hmc.seed, repeat);
            let fit = target.sample(config.fit_samples, fit_seed);
            let init: Vec<f64> = target.sample(1, init_seed).iter().copied().collect();
            let score = match config.sources[s] {
                ScoreSource::True => FittedScore::True(target),
                ScoreSource::Ssge { r_bar } => FittedScore::Ssge(ScoreEstimator::fit(
                    &fit,
                    &SsgeConfig { sigma: SigmaRule::Median, rank: RankRule::Threshold(r_bar) },
                )?),
                ScoreSource::SteinPlus { eta } => FittedScore::SteinPlus(SteinPlus::new(&fit, eta, SigmaRule::Median)?),
                ScoreSource::Zero => FittedScore::Zero(d),
            };
            let hmc = HmcConfig { seed: chain_seed, ..config.hmc };
            hmc_chain(&init, |x| score.eval(x), |x| target.log_density_at(x), &hmc)
        })
        .collect();

    let mut rows: Vec<ComparisonRow> = config
        .sources
        .iter()
        .map(|&estimator| ComparisonRow { estimator, ratios: Vec::new(), mean: 0.0, std: 0.0 })
        .collect();
    let mut chains: Vec<Vec<HmcTrace>> = vec![Vec::with_capacity(config.n_repeats); config.sources.len()];
    for (&(_, s), trace) in jobs.iter().zip(traces) {
        let trace = trace?;
        rows[s].ratios.push(trace.acceptance_ratio);
        chains[s].push(trace);
    }
    for row in &mut rows {
        (row.mean, row.std) = mean_std(&row.ratios);
    }
    Ok((rows, chains))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_score(x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }

    fn gauss_logp(x: &[f64]) -> f64 {
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn free_flight_with_zero_score() {
        let (x, p) = leapfrog(&[1.0, -2.0], &[0.5, 0.25], |_| vec![0.0, 0.0], 0.1, 7);
        assert!((x[0] - (1.0 + 0.7 * 0.5)).abs() < 1e-14);
        assert!((x[1] - (-2.0 + 0.7 * 0.25)).abs() < 1e-14);
        assert_eq!(p, vec![0.5, 0.25]);
    }

    #[test]
    fn hand_stepped_single_step() {
        let (x, p) = leapfrog(&[0.0], &[1.0], gauss_score, 0.1, 1);
        assert!((x[0] - 0.1).abs() < 1e-15);
        assert!((p[0] - 0.995).abs() < 1e-15);
    }

    #[test]
    fn reversible() {
        let score = |x: &[f64]| vec![-x[0] + 0.3 * x[1].sin(), -2.0 * x[1] * x[0].cos().abs()];
        let (x0, p0) = (vec![0.4, -1.1], vec![1.3, 0.2]);
        let (x1, p1) = leapfrog(&x0, &p0, score, 0.07, 9);
        let neg: Vec<f64> = p1.iter().map(|v| -v).collect();
        let (x2, p2) = leapfrog(&x1, &neg, score, 0.07, 9);
        for c in 0..2 {
            assert!((x2[c] - x0[c]).abs() < 1e-10);
            assert!((p2[c] + p0[c]).abs() < 1e-10);
        }
    }

    #[test]
    fn volume_preserving() {
        let o = Oracle::default_banana();
        let score = |x: &[f64]| o.score_at(x);
        let z0 = [0.3, -0.2, 0.8, 0.5];
        let h = 1e-6;
        let flow = |z: &[f64]| {
            let (x, p) = leapfrog(&z[..2], &z[2..], score, 0.05, 1);
            [x[0], x[1], p[0], p[1]]
        };
        let mut jac = DMatrix::zeros(4, 4);
        for c in 0..4 {
            let mut up = z0;
            let mut dn = z0;
            up[c] += h;
            dn[c] -= h;
            let (fu, fd) = (flow(&up), flow(&dn));
            for r in 0..4 {
                jac[(r, c)] = (fu[r] - fd[r]) / (2.0 * h);
            }
        }
        assert!((jac.determinant() - 1.0).abs() < 1e-6, "det {}", jac.determinant());
    }

    #[test]
    fn energy_error_is_second_order() {
        let o = Oracle::default_banana();
        let mut ratios = Vec::new();
        let starts = o.sample(21, 3);
        let mut r = rng::seeded(4);
        for n in 0..starts.nrows() {
            let x0: Vec<f64> = starts.row(n).iter().copied().collect();
            let p0: Vec<f64> = (0..2).map(|_| r.sample(StandardNormal)).collect();
            let energy = |x: &[f64], p: &[f64]| -o.log_density_at(x) + kinetic(p);
            let h0 = energy(&x0, &p0);
            let (xa, pa) = leapfrog(&x0, &p0, |x| o.score_at(x), 0.04, 10);
            let (xb, pb) = leapfrog(&x0, &p0, |x| o.score_at(x), 0.02, 20);
            let ea = (energy(&xa, &pa) - h0).abs();
            let eb = (energy(&xb, &pb) - h0).abs();
            ratios.push(ea / eb);
        }
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[ratios.len() / 2] >= 3.0, "{ratios:?}");
    }

    #[test]
    fn exact_gradient_accepts_most_proposals() {
        let cfg = HmcConfig { seed: 1, ..Default::default() };
        let trace = hmc_chain(&[0.0, 0.0], gauss_score, gauss_logp, &cfg).unwrap();
        assert!(trace.acceptance_ratio > 0.9, "{}", trace.acceptance_ratio);
        assert_eq!(trace.states.nrows(), 5000);
    }

    #[test]
    fn zero_score_on_sharp_target_rejects() {
        let s = 0.01;
        let logp = |x: &[f64]| -0.5 * x.iter().map(|v| (v / s).powi(2)).sum::<f64>();
        let cfg = HmcConfig { step_size_range: (0.5, 1.0), n_iterations: 2000, ..Default::default() };
        let trace = hmc_chain(&[0.0], |_| vec![0.0], logp, &cfg).unwrap();
        assert!(trace.acceptance_ratio < 0.05, "{}", trace.acceptance_ratio);
    }

    #[test]
    fn rejected_steps_repeat_state_and_ratio_is_mean() {
        let cfg = HmcConfig { n_iterations: 500, seed: 3, step_size_range: (0.5, 1.5), ..Default::default() };
        let trace = hmc_chain(&[0.5], |_| vec![0.0], gauss_logp, &cfg).unwrap();
        let mut prev = 0.5;
        for (i, &a) in trace.accepted.iter().enumerate() {
            if !a {
                assert_eq!(trace.states[(i, 0)], prev);
            }
            prev = trace.states[(i, 0)];
        }
        let mean = trace.accepted.iter().filter(|&&a| a).count() as f64 / 500.0;
        assert_eq!(trace.acceptance_ratio, mean);
        assert!(trace.acceptance_ratio > 0.0 && trace.acceptance_ratio < 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = HmcConfig { n_iterations: 300, seed: 12, ..Default::default() };
        let a = hmc_chain(&[0.1, 0.2], gauss_score, gauss_logp, &cfg).unwrap();
        let b = hmc_chain(&[0.1, 0.2], gauss_score, gauss_logp, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_proposals_are_rejected_and_counted() {
        // log density is -inf right of 1
        let logp = |x: &[f64]| if x[0] > 1.0 { f64::NEG_INFINITY } else { -0.5 * x[0] * x[0] };
        let cfg = HmcConfig { n_iterations: 500, seed: 2, step_size_range: (0.3, 0.5), ..Default::default() };
        let trace = hmc_chain(&[0.9], |_| vec![0.0], logp, &cfg).unwrap();
        assert!(trace.non_finite_proposals > 0);
        assert!(trace.states.iter().all(|&v| v <= 1.0));
        assert_eq!(
            hmc_chain(&[2.0], |_| vec![0.0], logp, &cfg).unwrap_err(),
            Error::NonFiniteEnergy
        );
    }

    #[test]
    fn invalid_ranges() {
        for cfg in [
            HmcConfig { step_size_range: (0.0, 0.1), ..Default::default() },
            HmcConfig { step_size_range: (0.2, 0.1), ..Default::default() },
            HmcConfig { n_leapfrog_range: (0, 3), ..Default::default() },
            HmcConfig { n_leapfrog_range: (5, 3), ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn comparison_single_repeat_is_reproducible() {
        let cfg = ComparisonConfig {
            n_repeats: 1,
            fit_samples: 50,
            hmc: HmcConfig { n_iterations: 200, ..Default::default() },
            ..Default::default()
        };
        let o = Oracle::default_banana();
        let a = acceptance_comparison(&o, &cfg).unwrap();
        let b = acceptance_comparison(&o, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|r| r.std == 0.0 && r.ratios.len() == 1));
    }
}
