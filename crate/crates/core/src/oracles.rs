//! Analytic targets with exact scores, used as ground truth.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result, SampleMatrix};

/// A distribution with a sampler, an exact score and a log density known
/// up to an additive constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// Diagonal Gaussian `N(mean, diag(std²))`.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Two-component mixture with a shared diagonal covariance.
    Gmm2 { weights: [f64; 2], means: [Vec<f64>; 2], std: Vec<f64> },
    /// Twisted Gaussian: `y ~ N(0, diag(std², 1, …, 1))`,
    /// `x₂ = y₂ + curvature·(y₁² − std²)`, other coordinates unchanged.
    Banana { curvature: f64, std: f64, dim: usize },
}

impl Oracle {
    pub fn standard_normal(dim: usize) -> Self {
        Oracle::Gaussian { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// The 2-D banana used by the HMC experiments.
    pub fn default_banana() -> Self {
        Oracle::Banana { curvature: 1.0, std: 1.0, dim: 2 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Oracle::Gaussian { mean, .. } => mean.len(),
            Oracle::Gmm2 { std, .. } => std.len(),
            Oracle::Banana { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        let positive = |v: &[f64]| v.iter().all(|s| s.is_finite() && *s > 0.0);
        match self {
            Oracle::Gaussian { mean, std } => {
                if mean.is_empty() || mean.len() != std.len() {
                    return bad("gaussian mean and std must be nonempty and equal length");
                }
                if !positive(std) || mean.iter().any(|m| !m.is_finite()) {
                    return bad("gaussian std must be positive and mean finite");
                }
            }
            Oracle::Gmm2 { weights, means, std } => {
                if std.is_empty() || means.iter().any(|m| m.len() != std.len()) {
                    return bad("gmm2 means and std must be nonempty and equal length");
                }
                if !positive(std) || means.iter().flatten().any(|m| !m.is_finite()) {
                    return bad("gmm2 std must be positive and means finite");
                }
                if !(weights[0] > 0.0 && weights[1] > 0.0) || (weights[0] + weights[1] - 1.0).abs() > 1e-12 {
                    return bad("gmm2 weights must be positive and sum to 1");
                }
            }
            Oracle::Banana { curvature, std, dim } => {
                if *dim < 2 {
                    return bad("banana needs at least 2 dimensions");
                }
                if !curvature.is_finite() || !(std.is_finite() && *std > 0.0) {
                    return bad("banana curvature must be finite and std positive");
                }
            }
        }
        Ok(())
    }

    /// `m` draws, deterministic in `seed`.
    pub fn sample(&self, m: usize, seed: u64) -> SampleMatrix {
        let mut r = rng::seeded(seed);
        let d = self.dim();
        let mut out = DMatrix::zeros(m, d);
        for i in 0..m {
            match self {
                Oracle::Gaussian { mean, std } => {
                    for c in 0..d {
                        let z: f64 = r.sample(StandardNormal);
                        out[(i, c)] = mean[c] + std[c] * z;
                    }
                }
                Oracle::Gmm2 { weights, means, std } => {
                    let u: f64 = r.random();
                    let comp = if u < weights[0] { 0 } else { 1 };
                    for c in 0..d {
                        let z: f64 = r.sample(StandardNormal);
                        out[(i, c)] = means[comp][c] + std[c] * z;
                    }
                }
                Oracle::Banana { curvature, std, .. } => {
                    for c in 0..d {
                        out[(i, c)] = r.sample(StandardNormal);
                    }
                    let y1 = std * out[(i, 0)];
                    out[(i, 0)] = y1;
                    out[(i, 1)] += curvature * (y1 * y1 - std * std);
                }
            }
        }
        out
    }

    pub fn log_density_at(&self, x: &[f64]) -> f64 {
        match self {
            Oracle::Gaussian { mean, std } => {
                -0.5 * x.iter().zip(mean).zip(std).map(|((x, m), s)| ((x - m) / s).powi(2)).sum::<f64>()
            }
            Oracle::Gmm2 { weights, means, std } => {
                let comp = |k: usize| {
                    weights[k].ln()
                        - 0.5 * x.iter().zip(&means[k]).zip(std).map(|((x, m), s)| ((x - m) / s).powi(2)).sum::<f64>()
                };
                let (a, b) = (comp(0), comp(1));
                let hi = a.max(b);
                hi + ((a - hi).exp() + (b - hi).exp()).ln()
            }
            Oracle::Banana { curvature, std, .. } => {
                let t = x[1] - curvature * (x[0] * x[0] - std * std);
                let rest: f64 = x[2..].iter().map(|v| v * v).sum();
                -0.5 * ((x[0] / std).powi(2) + t * t + rest)
            }
        }
    }

    pub fn score_at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Oracle::Gaussian { mean, std } => {
                x.iter().zip(mean).zip(std).map(|((x, m), s)| -(x - m) / (s * s)).collect()
            }
            Oracle::Gmm2 { weights, means, std } => {
                let comp = |k: usize| {
                    weights[k].ln()
                        - 0.5 * x.iter().zip(&means[k]).zip(std).map(|((x, m), s)| ((x - m) / s).powi(2)).sum::<f64>()
                };
                let (a, b) = (comp(0), comp(1));
                // responsibility of component 0, computed stably
                let r0 = 1.0 / (1.0 + (b - a).exp());
                let r = [r0, 1.0 - r0];
                (0..x.len())
                    .map(|c| -(0..2).map(|k| r[k] * (x[c] - means[k][c])).sum::<f64>() / (std[c] * std[c]))
                    .collect()
            }
            Oracle::Banana { curvature, std, .. } => {
                let t = x[1] - curvature * (x[0] * x[0] - std * std);
                let mut g: Vec<f64> = x.iter().map(|v| -v).collect();
                g[0] = -x[0] / (std * std) + 2.0 * curvature * x[0] * t;
                g[1] = -t;
                g
            }
        }
    }

    /// Exact `∇ₓ log q` at each row.
    pub fn true_score(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(points.nrows(), points.ncols());
        for n in 0..points.nrows() {
            let x: Vec<f64> = points.row(n).iter().copied().collect();
            for (c, v) in self.score_at(&x).into_iter().enumerate() {
                out[(n, c)] = v;
            }
        }
        out
    }

    /// `log q` up to an additive constant, at each row.
    pub fn log_density_unnormalized(&self, points: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_fn(points.nrows(), |n, _| {
            let x: Vec<f64> = points.row(n).iter().copied().collect();
            self.log_density_at(&x)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zoo() -> Vec<Oracle> {
        vec![
            Oracle::standard_normal(1),
            Oracle::Gaussian { mean: vec![1.0, -2.0, 0.5], std: vec![0.5, 2.0, 1.3] },
            Oracle::Gmm2 { weights: [0.3, 0.7], means: [vec![-1.0, 0.0], vec![2.0, 1.0]], std: vec![0.8, 1.2] },
            Oracle::default_banana(),
            Oracle::Banana { curvature: 0.3, std: 2.0, dim: 3 },
        ]
    }

    #[test]
    fn all_kinds_validate() {
        for o in zoo() {
            o.validate().unwrap();
        }
        assert!(Oracle::Gaussian { mean: vec![0.0], std: vec![0.0] }.validate().is_err());
        assert!(Oracle::Gmm2 { weights: [0.5, 0.6], means: [vec![0.0], vec![1.0]], std: vec![1.0] }.validate().is_err());
        assert!(Oracle::Banana { curvature: 1.0, std: 1.0, dim: 1 }.validate().is_err());
    }

    #[test]
    fn standard_normal_moments() {
        let x = Oracle::standard_normal(1).sample(100_000, 99);
        let n = x.nrows() as f64;
        let mean = x.sum() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn degenerate_mixture_behaves_like_gaussian() {
        let g = Oracle::Gaussian { mean: vec![1.5], std: vec![0.7] };
        let m = Oracle::Gmm2 { weights: [0.4, 0.6], means: [vec![1.5], vec![1.5]], std: vec![0.7] };
        let x = m.sample(50_000, 5);
        let n = x.nrows() as f64;
        let mean = x.sum() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 1.5).abs() < 4.0 * 0.7 / n.sqrt());
        assert!((sd - 0.7).abs() < 0.02);
        let pts = DMatrix::from_column_slice(3, 1, &[-1.0, 0.4, 3.0]);
        let (lg, lm) = (g.log_density_unnormalized(&pts), m.log_density_unnormalized(&pts));
        let offset = lm[0] - lg[0];
        for i in 0..3 {
            assert!((lm[i] - lg[i] - offset).abs() < 1e-12);
        }
        assert!((g.true_score(&pts) - m.true_score(&pts)).amax() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        for o in zoo() {
            assert_eq!(o.sample(20, 3), o.sample(20, 3));
            assert_ne!(o.sample(20, 3), o.sample(20, 4));
        }
    }

    #[test]
    fn closed_form_values() {
        let g = Oracle::standard_normal(1);
        assert_eq!(g.score_at(&[2.0]), vec![-2.0]);
        assert_eq!(g.log_density_at(&[0.0]) - g.log_density_at(&[1.0]), 0.5);
        let mix = Oracle::Gmm2 { weights: [0.5, 0.5], means: [vec![-2.0, 1.0], vec![2.0, 1.0]], std: vec![1.0, 1.0] };
        let s = mix.score_at(&[0.0, 1.0]);
        assert!(s[0].abs() < 1e-15 && s[1].abs() < 1e-15);
    }

    #[test]
    fn score_is_gradient_of_log_density() {
        let h = 1e-5;
        for o in zoo() {
            let d = o.dim();
            let pts = o.sample(200, 77);
            for n in 0..200 {
                let x: Vec<f64> = pts.row(n).iter().copied().collect();
                let g = o.score_at(&x);
                for c in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[c] += h;
                    xm[c] -= h;
                    let fd = (o.log_density_at(&xp) - o.log_density_at(&xm)) / (2.0 * h);
                    assert!((fd - g[c]).abs() <= 1e-6 * g[c].abs().max(1.0), "{o:?} at {x:?}: {fd} vs {}", g[c]);
                }
            }
        }
    }

    #[test]
    fn gaussian_stein_identity_with_linear_test_function() {
        // (1/M) Σ x gᵀ + I → 0 with standard error ~ 1/√M per entry
        let o = Oracle::Gaussian { mean: vec![0.0, 0.0], std: vec![1.0, 2.0] };
        let m = 10_000;
        let x = o.sample(m, 8);
        let g = o.true_score(&x);
        let mut acc = DMatrix::<f64>::identity(2, 2);
        let mut sq = DMatrix::<f64>::zeros(2, 2);
        for n in 0..m {
            for a in 0..2 {
                for b in 0..2 {
                    let v = x[(n, a)] * g[(n, b)];
                    acc[(a, b)] += v / m as f64;
                    sq[(a, b)] += v * v / m as f64;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let mean_term = acc[(a, b)] - if a == b { 1.0 } else { 0.0 };
                let se = ((sq[(a, b)] - mean_term * mean_term) / m as f64).sqrt();
                assert!(acc[(a, b)].abs() <= 5.0 * se, "({a},{b}): {} vs se {se}", acc[(a, b)]);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        for o in zoo() {
            let s = serde_json::to_string(&o).unwrap();
            assert_eq!(serde_json::from_str::<Oracle>(&s).unwrap(), o);
        }
        let parsed: Oracle = serde_json::from_str(r#"{"kind":"banana","curvature":0.5,"std":1.0,"dim":2}"#).unwrap();
        assert_eq!(parsed.dim(), 2);
    }
}
