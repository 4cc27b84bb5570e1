//! Entropy gradients of reparameterized samplers `x = f(ε; φ)`, `ε ~ N(0, I)`.
//!
//! The gradient of `H(q_φ)` reduces to `−E_ε[∇ₓ log q_φ(x) · ∇_φ f(ε; φ)]`
//! because the expected parameter score vanishes; the remaining `∇ₓ log q`
//! is estimated with SSGE on the same draws. Nothing here ever takes a
//! parameter score as input.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ssge::{ScoreEstimator, SsgeConfig};
use crate::{rng, Error, Result};

/// A differentiable sampler with a closed-form Jacobian in its parameters.
pub trait ReparamFamily {
    fn noise_dim(&self) -> usize;

    fn param_dim(&self) -> usize;

    fn transform(&self, eps: &[f64], phi: &[f64]) -> Vec<f64>;

    /// `∂f_k/∂φ_p` at row `p`, column `k`.
    fn jacobian(&self, eps: &[f64], phi: &[f64]) -> DMatrix<f64>;
}

/// `x = μ + s ⊙ ε` with `φ = (μ₁ … μ_d, s₁ … s_d)`.
#[derive(Debug, Clone, Copy)]
pub struct LocationScale {
    pub dim: usize,
}

impl LocationScale {
    /// `∇_φ H = (0, …, 0, 1/s₁, …, 1/s_d)`, from `H = Σ log sᵢ + const`.
    pub fn analytic_entropy_grad(&self, phi: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..2 * d).map(|p| if p < d { 0.0 } else { 1.0 / phi[p] }).collect()
    }
}

impl ReparamFamily for LocationScale {
    fn noise_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        2 * self.dim
    }

    fn transform(&self, eps: &[f64], phi: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|k| phi[k] + phi[d + k] * eps[k]).collect()
    }

    fn jacobian(&self, eps: &[f64], _phi: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut j = DMatrix::zeros(2 * d, d);
        for k in 0..d {
            j[(k, k)] = 1.0;
            j[(d + k, k)] = eps[k];
        }
        j
    }
}

/// `x = μ + ε`; the entropy does not depend on `μ`.
#[derive(Debug, Clone, Copy)]
pub struct Location {
    pub dim: usize,
}

impl ReparamFamily for Location {
    fn noise_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.dim
    }

    fn transform(&self, eps: &[f64], phi: &[f64]) -> Vec<f64> {
        eps.iter().zip(phi).map(|(e, m)| m + e).collect()
    }

    fn jacobian(&self, _eps: &[f64], _phi: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConfig {
    pub n_noise: usize,
    pub seed: u64,
    pub ssge: SsgeConfig,
    /// Fit the score estimator on an independent batch of draws instead of
    /// the ones being averaged.
    pub fresh_samples: bool,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self { n_noise: 100, seed: 0, ssge: SsgeConfig::default(), fresh_samples: false }
    }
}

fn draw_noise(n: usize, dim: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    DMatrix::from_fn(n, dim, |_, _| r.sample(StandardNormal))
}

fn push_forward<F: ReparamFamily + ?Sized>(family: &F, noise: &DMatrix<f64>, phi: &[f64]) -> DMatrix<f64> {
    let n = noise.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let eps: Vec<f64> = noise.row(i).iter().copied().collect();
            family.transform(&eps, phi)
        })
        .collect();
    let d = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, d, |i, k| rows[i][k])
}

fn check_inputs<F: ReparamFamily + ?Sized>(family: &F, phi: &[f64], n_noise: usize) -> Result<()> {
    if n_noise < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n_noise });
    }
    if phi.len() != family.param_dim() {
        return Err(Error::DimensionMismatch { expected: family.param_dim(), got: phi.len() });
    }
    Ok(())
}

/// `−(1/n) Σₘ ∇_φ f(εᵐ; φ) · score(xᵐ)` over `n` fresh noise draws.
pub fn entropy_grad_with_score<F, S>(family: &F, phi: &[f64], n_noise: usize, seed: u64, score: S) -> Result<Vec<f64>>
where
    F: ReparamFamily + ?Sized,
    S: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    check_inputs(family, phi, n_noise)?;
    let noise = draw_noise(n_noise, family.noise_dim(), seed);
    let x = push_forward(family, &noise, phi);
    let g = score(&x);
    Ok(average_chain_rule(family, phi, &noise, &g))
}

fn average_chain_rule<F: ReparamFamily + ?Sized>(
    family: &F,
    phi: &[f64],
    noise: &DMatrix<f64>,
    scores: &DMatrix<f64>,
) -> Vec<f64> {
    let n = noise.nrows();
    let mut acc = vec![0.0; family.param_dim()];
    for i in 0..n {
        let eps: Vec<f64> = noise.row(i).iter().copied().collect();
        let jac = family.jacobian(&eps, phi);
        let contrib = jac * scores.row(i).transpose();
        for (a, v) in acc.iter_mut().zip(contrib.iter()) {
            *a += v;
        }
    }
    acc.iter().map(|v| -v / n as f64).collect()
}

/// Entropy gradient with the score of `q_φ` estimated by SSGE.
pub fn entropy_grad<F: ReparamFamily + ?Sized>(family: &F, phi: &[f64], config: &EntropyConfig) -> Result<Vec<f64>> {
    check_inputs(family, phi, config.n_noise)?;
    let noise = draw_noise(config.n_noise, family.noise_dim(), config.seed);
    let x = push_forward(family, &noise, phi);
    let estimator = if config.fresh_samples {
        let fit_noise = draw_noise(config.n_noise, family.noise_dim(), rng::derive_seed(config.seed, 1));
        ScoreEstimator::fit(&push_forward(family, &fit_noise, phi), &config.ssge)?
    } else {
        ScoreEstimator::fit(&x, &config.ssge)?
    };
    let g = estimator.score(&x);
    Ok(average_chain_rule(family, phi, &noise, &g))
}
