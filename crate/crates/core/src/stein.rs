//! Ridge-regression Stein gradient estimator.
//!
//! Estimates the score only at the sample points:
//!
//! ```text
//! Ĝ = −M (K + ηI)⁻¹ B,    Bᵢⱼ = (1/M) Σₘ ∂k(xⁱ, xᵐ)/∂xᵐⱼ
//! ```
//!
//! The out-of-sample extension ("Stein⁺") appends the query point to the
//! sample set, refits with the same `σ` and `η`, and reads off the last row.
//! [`stein_plus`] does exactly that; [`SteinPlus`] gets the same numbers from
//! one Cholesky factorization and a bordered solve per query.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::kernel::{self, Bandwidth};
use crate::spectral::SigmaRule;
use crate::{Error, Result, SampleMatrix};

#[derive(Debug, Clone)]
pub struct SteinFit {
    pub samples: SampleMatrix,
    pub sigma: Bandwidth,
    pub eta: f64,
    /// `M × d` score estimates at the samples.
    pub g_hat: DMatrix<f64>,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")))
    }
}

/// `Sᵢ = Σₘ ∂k(xⁱ, xᵐ)/∂xᵐ = Σₘ (xⁱ − xᵐ)/σ² k(xⁱ, xᵐ)`, an `M × d` matrix.
/// `B` is this divided by `M`.
fn second_arg_grad_sums(samples: &SampleMatrix, gram: &DMatrix<f64>, sigma: Bandwidth) -> DMatrix<f64> {
    let (m, d) = samples.shape();
    let s2 = sigma.value() * sigma.value();
    let mut sums = DMatrix::zeros(m, d);
    for i in 0..m {
        for q in 0..m {
            let w = gram[(i, q)] / s2;
            for c in 0..d {
                sums[(i, c)] += (samples[(i, c)] - samples[(q, c)]) * w;
            }
        }
    }
    sums
}

fn regularized_cholesky(gram: &DMatrix<f64>, eta: f64) -> Result<Cholesky<f64, Dyn>> {
    let n = gram.nrows();
    let a = gram + DMatrix::identity(n, n) * eta;
    Cholesky::new(a).ok_or(Error::SingularSystem)
}

/// Fits the Stein estimator with a resolved bandwidth.
pub fn stein_fit_with_bandwidth(samples: &SampleMatrix, eta: f64, sigma: Bandwidth) -> Result<SteinFit> {
    check_eta(eta)?;
    let m = samples.nrows();
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: m });
    }
    let gram = kernel::gram_matrix(samples, sigma);
    let b = second_arg_grad_sums(samples, &gram, sigma) / m as f64;
    let chol = regularized_cholesky(&gram, eta)?;
    let g_hat = chol.solve(&b) * -(m as f64);
    if g_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(SteinFit { samples: samples.clone(), sigma, eta, g_hat })
}

pub fn stein_fit(samples: &SampleMatrix, eta: f64, sigma: SigmaRule) -> Result<SteinFit> {
    check_eta(eta)?;
    let sigma = sigma.resolve(samples)?;
    stein_fit_with_bandwidth(samples, eta, sigma)
}

/// Stein⁺ predictions by literal refitting: one `(M+1)`-sample fit per
/// query point, `σ` resolved once from the original samples.
pub fn stein_plus(samples: &SampleMatrix, eta: f64, sigma: SigmaRule, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_eta(eta)?;
    let sigma = sigma.resolve(samples)?;
    let (m, d) = samples.shape();
    if points.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: points.ncols() });
    }
    let rows: Vec<Result<Vec<f64>>> = (0..points.nrows())
        .into_par_iter()
        .map(|n| {
            let mut aug = samples.clone().insert_row(m, 0.0);
            for c in 0..d {
                aug[(m, c)] = points[(n, c)];
            }
            let fit = stein_fit_with_bandwidth(&aug, eta, sigma)?;
            Ok(fit.g_hat.row(m).iter().copied().collect())
        })
        .collect();
    let mut out = DMatrix::zeros(points.nrows(), d);
    for (n, row) in rows.into_iter().enumerate() {
        for (c, v) in row?.into_iter().enumerate() {
            out[(n, c)] = v;
        }
    }
    Ok(out)
}

/// Stein⁺ predictor that reuses the factorization of `K + ηI`.
///
/// With `A = K + ηI` and the query's kernel column `k`, the augmented
/// system is `[[A, k], [kᵀ, 1 + η]]`. Its last solution row follows from
/// the Schur complement `s = 1 + η − kᵀA⁻¹k`, costing `O(M²)` per query.
#[derive(Debug, Clone)]
pub struct SteinPlus {
    samples: SampleMatrix,
    sigma: Bandwidth,
    eta: f64,
    chol: Cholesky<f64, Dyn>,
    grad_sums: DMatrix<f64>,
}

impl SteinPlus {
    pub fn new(samples: &SampleMatrix, eta: f64, sigma: SigmaRule) -> Result<Self> {
        check_eta(eta)?;
        let m = samples.nrows();
        if m < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: m });
        }
        let sigma = sigma.resolve(samples)?;
        let gram = kernel::gram_matrix(samples, sigma);
        let grad_sums = second_arg_grad_sums(samples, &gram, sigma);
        let chol = regularized_cholesky(&gram, eta)?;
        Ok(Self { samples: samples.clone(), sigma, eta, chol, grad_sums })
    }

    pub fn sigma(&self) -> Bandwidth {
        self.sigma
    }

    pub fn predict_one(&self, x: &[f64]) -> Vec<f64> {
        let (m, d) = self.samples.shape();
        assert_eq!(x.len(), d, "query point has the wrong dimension");
        let s2 = self.sigma.value() * self.sigma.value();
        let denom = 2.0 * s2;

        let mut kcol = DVector::zeros(m);
        for q in 0..m {
            let mut sq = 0.0;
            for c in 0..d {
                let diff = x[c] - self.samples[(q, c)];
                sq += diff * diff;
            }
            kcol[q] = (-sq / denom).exp();
        }
        let v = self.chol.solve(&kcol);
        let schur = 1.0 + self.eta - v.dot(&kcol);

        // M'·B' restricted to the original rows, and for the new row.
        let mut out = vec![0.0; d];
        for c in 0..d {
            let mut new_row = 0.0;
            let mut proj = 0.0;
            for q in 0..m {
                let diff = x[c] - self.samples[(q, c)];
                new_row += diff / s2 * kcol[q];
                let old_row = self.grad_sums[(q, c)] - diff / s2 * kcol[q];
                proj += v[q] * old_row;
            }
            out[c] = -(new_row - proj) / schur;
        }
        out
    }

    pub fn predict(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.samples.ncols();
        let rows: Vec<Vec<f64>> = (0..points.nrows())
            .into_par_iter()
            .map(|n| {
                let x: Vec<f64> = points.row(n).iter().copied().collect();
                self.predict_one(&x)
            })
            .collect();
        DMatrix::from_fn(points.nrows(), d, |n, c| rows[n][c])
    }
}
