//! Spectral Stein gradient estimator.
//!
//! Each score coordinate is expanded in the eigenfunctions of the kernel
//! operator, `gᵢ(x) = Σⱼ βᵢⱼ ψⱼ(x)`. Stein's identity applied with `ψⱼ` as
//! test function, together with orthonormality of the eigenfunctions,
//! gives `βᵢⱼ = −E_q ∂ψⱼ/∂xᵢ`. Truncating at `J` terms and substituting
//! Nyström eigenfunctions yields
//!
//! ```text
//! ĝᵢ(x) = Σⱼ β̂ᵢⱼ ψ̂ⱼ(x),    β̂ᵢⱼ = −(1/M) Σₘ ∂ψ̂ⱼ/∂xᵢ (xᵐ)
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::spectral::{RankRule, SigmaRule, SpectralBasis};
use crate::{Error, Result, SampleMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SsgeConfig {
    #[serde(default)]
    pub sigma: SigmaRule,
    #[serde(default)]
    pub rank: RankRule,
}

/// A fitted score estimate `ĝ(x)`, defined everywhere.
#[derive(Debug, Clone)]
pub struct ScoreEstimator {
    basis: SpectralBasis,
    /// `J × d`: row per eigenfunction, column per coordinate.
    beta: DMatrix<f64>,
}

impl ScoreEstimator {
    pub fn fit(samples: &SampleMatrix, config: &SsgeConfig) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::InvalidParameter("samples must have at least one coordinate".into()));
        }
        let basis = SpectralBasis::fit(samples, config.sigma, config.rank)?;
        Ok(Self::from_basis(basis))
    }

    /// Fits the coefficients on the basis' own training samples.
    pub fn from_basis(basis: SpectralBasis) -> Self {
        let grads = basis.nystrom_grad(basis.samples());
        let (m, j, d) = (basis.num_samples(), basis.rank(), basis.dim());
        let mut beta = DMatrix::zeros(j, d);
        for p in 0..m {
            for b in 0..j {
                for (c, g) in grads.fiber(p, b).iter().enumerate() {
                    beta[(b, c)] += g;
                }
            }
        }
        beta /= -(m as f64);
        Self { basis, beta }
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `N × d` matrix whose row `n` is `ĝ(xₙ)`.
    pub fn score(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        self.basis.nystrom_eval(points) * &self.beta
    }

    pub fn score_at(&self, x: &[f64]) -> Vec<f64> {
        let p = DMatrix::from_row_slice(1, x.len(), x);
        self.score(&p).iter().copied().collect()
    }

    /// Negates eigenfunction `j` and its coefficients; the score is unchanged.
    pub fn flip_sign(&mut self, j: usize) {
        self.basis.flip_sign(j);
        self.beta.row_mut(j).neg_mut();
    }

    /// Monte Carlo Stein residual `(1/P) Σₚ [ψ̂ⱼ(zᵖ) g(zᵖ) + ∇ψ̂ⱼ(zᵖ)]` as a
    /// `J × d` matrix, for a reference score `g` and draws `zᵖ` from the
    /// target. Should be near zero.
    pub fn stein_residual<F>(&self, score: F, eval_samples: &DMatrix<f64>) -> DMatrix<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let (p, j, d) = (eval_samples.nrows(), self.rank(), self.dim());
        let psi = self.basis.nystrom_eval(eval_samples);
        let grads = self.basis.nystrom_grad(eval_samples);
        let mut out = DMatrix::zeros(j, d);
        let mut z = vec![0.0; d];
        for n in 0..p {
            for c in 0..d {
                z[c] = eval_samples[(n, c)];
            }
            let g = score(&z);
            assert_eq!(g.len(), d, "reference score has the wrong dimension");
            for b in 0..j {
                let fib = grads.fiber(n, b);
                for c in 0..d {
                    out[(b, c)] += psi[(n, b)] * g[c] + fib[c];
                }
            }
        }
        out / p as f64
    }
}
