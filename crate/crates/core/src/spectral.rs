//! Eigenfunctions of the kernel integral operator, approximated from the
//! Gram matrix of a sample set.
//!
//! The eigenvectors `uⱼ` of `K` with eigenvalues `λⱼ` give eigenfunction
//! values `ψⱼ(xᵐ) ≈ √M·uⱼₘ` at the samples and operator eigenvalues
//! `μⱼ ≈ λⱼ/M`. Anywhere else the Nyström formula
//!
//! ```text
//! ψ̂ⱼ(x) = √M/λⱼ · Σₘ uⱼₘ k(x, xᵐ)
//! ```
//!
//! extends them, and being a finite sum of kernels it has an exact gradient.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::kernel::{self, Bandwidth};
use crate::tensor::Tensor3;
use crate::{Error, Result, SampleMatrix};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGENVALUE_FLOOR: f64 = 1e-8;

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigvals: DVector<f64>,
    /// Column `j` is the eigenvector for `eigvals[j]`.
    pub eigvecs: DMatrix<f64>,
}

/// Symmetric eigendecomposition with a deterministic layout: eigenvalues in
/// descending order (ties keep the solver's index order) and each
/// eigenvector signed so that its largest-magnitude entry is positive, the
/// lowest index winning ties.
pub fn eigendecompose(k: &DMatrix<f64>) -> Result<EigenSystem> {
    let n = k.nrows();
    if n != k.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: k.ncols() });
    }
    if n == 0 {
        return Ok(EigenSystem { eigvals: DVector::zeros(0), eigvecs: DMatrix::zeros(0, 0) });
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigensolverFailure);
    }
    let eig = SymmetricEigen::try_new(k.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigensolverFailure)?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order among equal eigenvalues
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigvals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigvecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        eigvecs.set_column(dst, &(col * sign));
    }
    Ok(EigenSystem { eigvals, eigvecs })
}

/// Number of eigenvalues at or above the numerical floor.
pub fn retained_count(eigvals: &[f64]) -> usize {
    match eigvals.first() {
        Some(&top) if top > 0.0 => eigvals.iter().take_while(|&&v| v >= EIGENVALUE_FLOOR * top).count(),
        _ => 0,
    }
}

/// Largest `J` whose leading eigenvalues hold at most `r_bar` of the total
/// spectral mass, but never less than 1.
///
/// Eigenvalues below the floor count as zero mass, and `J` never exceeds the
/// number of retained eigenvalues.
pub fn select_rank(eigvals: &[f64], r_bar: f64) -> Result<usize> {
    if !(r_bar > 0.0 && r_bar <= 1.0) {
        return Err(Error::InvalidThreshold(r_bar));
    }
    let top = *eigvals.first().ok_or(Error::AllZeroSpectrum(0.0))?;
    if top.is_nan() || top <= 0.0 {
        return Err(Error::AllZeroSpectrum(top));
    }
    let kept = &eigvals[..retained_count(eigvals)];
    let total: f64 = kept.iter().sum();
    let mut cum = 0.0;
    let mut rank = 0;
    for (j, &v) in kept.iter().enumerate() {
        cum += v;
        if cum / total <= r_bar {
            rank = j + 1;
        } else {
            break;
        }
    }
    Ok(rank.max(1))
}

/// How the RBF bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaRule {
    /// Median pairwise distance of the fitting samples.
    #[default]
    Median,
    Fixed(f64),
}

impl SigmaRule {
    pub fn resolve(self, samples: &SampleMatrix) -> Result<Bandwidth> {
        match self {
            SigmaRule::Median => kernel::median_bandwidth(samples),
            SigmaRule::Fixed(s) => Bandwidth::new(s),
        }
    }
}

/// How many eigenfunctions to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    Fixed(usize),
    /// Eigenvalue-mass threshold `r̄ ∈ (0, 1]`.
    Threshold(f64),
}

impl Default for RankRule {
    fn default() -> Self {
        RankRule::Threshold(0.95)
    }
}

/// A fitted set of Nyström eigenfunctions.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    samples: SampleMatrix,
    sigma: Bandwidth,
    eigvals: Vec<f64>,
    /// `M × J`, column `j` is `uⱼ`.
    eigvecs: DMatrix<f64>,
    /// Every eigenvalue of the Gram matrix, descending.
    spectrum: Vec<f64>,
    /// `M × J`, column `j` is `√M/λⱼ · uⱼ`.
    weights: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn fit(samples: &SampleMatrix, sigma: SigmaRule, rank: RankRule) -> Result<Self> {
        let m = samples.nrows();
        if m < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: m });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("samples must be finite".into()));
        }
        let sigma = sigma.resolve(samples)?;
        let gram = kernel::gram_matrix(samples, sigma);
        let eig = eigendecompose(&gram)?;
        let spectrum: Vec<f64> = eig.eigvals.iter().copied().collect();
        let top = spectrum[0];
        if top <= 0.0 {
            return Err(Error::AllZeroSpectrum(top));
        }
        let j = match rank {
            RankRule::Fixed(j) => {
                if j < 1 || j > m {
                    return Err(Error::InvalidRank { rank: j, max: m });
                }
                j.min(retained_count(&spectrum))
            }
            RankRule::Threshold(r) => select_rank(&spectrum, r)?,
        };
        let eigvecs = eig.eigvecs.columns(0, j).into_owned();
        Ok(Self::from_parts(samples.clone(), sigma, spectrum, eigvecs))
    }

    fn from_parts(samples: SampleMatrix, sigma: Bandwidth, spectrum: Vec<f64>, eigvecs: DMatrix<f64>) -> Self {
        let j = eigvecs.ncols();
        let eigvals = spectrum[..j].to_vec();
        let root_m = (samples.nrows() as f64).sqrt();
        let mut weights = eigvecs.clone();
        for (c, lambda) in eigvals.iter().enumerate() {
            weights.column_mut(c).scale_mut(root_m / lambda);
        }
        Self { samples, sigma, eigvals, eigvecs, spectrum, weights }
    }

    pub fn samples(&self) -> &SampleMatrix {
        &self.samples
    }

    pub fn sigma(&self) -> Bandwidth {
        self.sigma
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn num_samples(&self) -> usize {
        self.samples.nrows()
    }

    /// Retained Gram eigenvalues `λ₁ ≥ … ≥ λ_J`.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// All Gram eigenvalues, descending, including the discarded tail.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Operator eigenvalue estimates `μⱼ = λⱼ/M`.
    pub fn mu(&self) -> Vec<f64> {
        let m = self.num_samples() as f64;
        self.eigvals.iter().map(|l| l / m).collect()
    }

    /// Smallest gap `min_{j ≤ J} |μⱼ − μⱼ₊₁|`, where `μ_{J+1}` comes from the
    /// full spectrum (zero past its end, negative round-off clamped to zero).
    pub fn eigengap(&self) -> f64 {
        let m = self.num_samples() as f64;
        let mu = |j: usize| self.spectrum.get(j).copied().unwrap_or(0.0).max(0.0) / m;
        (0..self.rank()).map(|j| (mu(j) - mu(j + 1)).abs()).fold(f64::INFINITY, f64::min)
    }

    /// Negates eigenvector `j`. Every estimator built on the basis must be
    /// invariant to this.
    pub fn flip_sign(&mut self, j: usize) {
        self.eigvecs.column_mut(j).neg_mut();
        self.weights.column_mut(j).neg_mut();
    }

    fn check_points(&self, points: &DMatrix<f64>) {
        assert_eq!(points.ncols(), self.dim(), "query points have the wrong dimension");
    }

    /// `N × J` matrix of `ψ̂ⱼ(xₙ)`.
    pub fn nystrom_eval(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        self.check_points(points);
        kernel::cross_kernel(points, &self.samples, self.sigma) * &self.weights
    }

    /// `N × J × d` tensor of `∇ₓψ̂ⱼ(xₙ)`, the exact gradient of
    /// [`nystrom_eval`](Self::nystrom_eval).
    pub fn nystrom_grad(&self, points: &DMatrix<f64>) -> Tensor3 {
        self.check_points(points);
        let (n, m, d, j) = (points.nrows(), self.num_samples(), self.dim(), self.rank());
        let s2 = self.sigma.value() * self.sigma.value();
        let denom = 2.0 * s2;
        let mut out = Tensor3::zeros(n, j, d);
        let mut diff = vec![0.0; d];
        for p in 0..n {
            for q in 0..m {
                let mut sq = 0.0;
                for c in 0..d {
                    diff[c] = points[(p, c)] - self.samples[(q, c)];
                    sq += diff[c] * diff[c];
                }
                let kv = (-sq / denom).exp();
                for b in 0..j {
                    let w = self.weights[(q, b)] * kv / s2;
                    let fib = out.fiber_mut(p, b);
                    for c in 0..d {
                        fib[c] -= w * diff[c];
                    }
                }
            }
        }
        out
    }

    /// Kernel PCA embedding `ξⱼ(x) = αⱼᵀ kₓ` with `αⱼ = uⱼ/√λⱼ`, equal to
    /// `√(λⱼ/M) · ψ̂ⱼ(x)`.
    pub fn kpca_embed(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        self.check_points(points);
        let mut alpha = self.eigvecs.clone();
        for (c, lambda) in self.eigvals.iter().enumerate() {
            alpha.column_mut(c).scale_mut(1.0 / lambda.sqrt());
        }
        kernel::cross_kernel(points, &self.samples, self.sigma) * alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::seeded(seed);
        DMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
    }

    fn check_eigensystem(k: &DMatrix<f64>, e: &EigenSystem) {
        let n = k.nrows();
        let top = e.eigvals[0].abs().max(1e-300);
        for j in 1..n {
            assert!(e.eigvals[j - 1] >= e.eigvals[j]);
        }
        let gram = e.eigvecs.transpose() * &e.eigvecs;
        assert!((gram - DMatrix::identity(n, n)).amax() <= 1e-8);
        let recon = &e.eigvecs * DMatrix::from_diagonal(&e.eigvals) * e.eigvecs.transpose();
        assert!((k - recon).amax() <= 1e-7 * top);
        for j in 0..n {
            let col = e.eigvecs.column(j);
            let mut pivot = 0;
            for i in 0..n {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            assert!(col[pivot] > 0.0);
            let resid = k * col - col * e.eigvals[j];
            assert!(resid.amax() <= 1e-7 * top);
        }
    }

    /// Power iteration with deflation; independent of the production solver.
    fn power_oracle(k: &DMatrix<f64>, count: usize) -> Vec<(f64, DVector<f64>)> {
        let n = k.nrows();
        let mut a = k.clone();
        let mut out = Vec::new();
        for t in 0..count {
            let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7 + t * 3) % 11) as f64 / 10.0);
            v /= v.norm();
            let mut lambda = 0.0;
            for _ in 0..20_000 {
                let w = &a * &v;
                let new_lambda = v.dot(&w);
                let norm = w.norm();
                let next = w / norm;
                let done = (new_lambda - lambda).abs() <= 1e-15 * new_lambda.abs() && (&next - &v).norm() < 1e-13;
                v = next;
                lambda = new_lambda;
                if done {
                    break;
                }
            }
            let mut pivot = 0;
            for i in 0..n {
                if v[i].abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            if v[pivot] < 0.0 {
                v.neg_mut();
            }
            a -= &v * v.transpose() * lambda;
            out.push((lambda, v));
        }
        out
    }

    #[test]
    fn identity_matrix() {
        let k = DMatrix::identity(3, 3);
        let e = eigendecompose(&k).unwrap();
        assert!(e.eigvals.iter().all(|v| (v - 1.0).abs() < 1e-15));
        check_eigensystem(&k, &e);
    }

    #[test]
    fn rank_one_ones_matrix() {
        let k = DMatrix::from_element(2, 2, 1.0);
        let e = eigendecompose(&k).unwrap();
        assert!((e.eigvals[0] - 2.0).abs() < 1e-14);
        assert!(e.eigvals[1].abs() < 1e-14);
        let h = 0.5f64.sqrt();
        assert!((e.eigvecs[(0, 0)] - h).abs() < 1e-14);
        assert!((e.eigvecs[(1, 0)] - h).abs() < 1e-14);
    }

    #[test]
    fn matches_power_iteration_oracle() {
        let x = randn(20, 2, 3);
        let k = kernel::gram_matrix(&x, Bandwidth::new(1.0).unwrap());
        let e = eigendecompose(&k).unwrap();
        check_eigensystem(&k, &e);
        // leading eigenvalues of a Gaussian Gram are well separated
        for (j, (lambda, v)) in power_oracle(&k, 4).into_iter().enumerate() {
            assert!((e.eigvals[j] - lambda).abs() <= 1e-6 * e.eigvals[0], "eigenvalue {j}");
            assert!((e.eigvecs.column(j) - v).amax() <= 1e-6, "eigenvector {j}");
        }
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        let mut k = DMatrix::identity(2, 2);
        k[(0, 1)] = f64::NAN;
        assert_eq!(eigendecompose(&k).unwrap_err(), Error::EigensolverFailure);
        assert!(matches!(eigendecompose(&DMatrix::zeros(2, 3)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn select_rank_examples() {
        assert_eq!(select_rank(&[4.0, 3.0, 2.0, 1.0], 0.95).unwrap(), 3);
        assert_eq!(select_rank(&[10.0, 1.0], 0.5).unwrap(), 1);
        assert_eq!(select_rank(&[4.0, 3.0, 2.0, 1.0], 1.0).unwrap(), 4);
        // floored tail does not count toward J or the mass
        assert_eq!(select_rank(&[1.0, 0.5, 1e-12, -1e-15], 1.0).unwrap(), 2);
        assert!(matches!(select_rank(&[0.0, 0.0], 0.9), Err(Error::AllZeroSpectrum(_))));
        assert!(matches!(select_rank(&[1.0], 0.0), Err(Error::InvalidThreshold(_))));
        assert!(matches!(select_rank(&[1.0], 1.5), Err(Error::InvalidThreshold(_))));
    }

    #[test]
    fn select_rank_matches_prefix_scan() {
        let x = randn(100, 1, 11);
        let sigma = kernel::median_bandwidth(&x).unwrap();
        let e = eigendecompose(&kernel::gram_matrix(&x, sigma)).unwrap();
        let vals: Vec<f64> = e.eigvals.iter().copied().collect();
        for r_bar in [0.5, 0.9, 0.95, 0.99, 0.999] {
            // brute force: recompute each prefix mass from scratch
            let floor = 1e-8 * vals[0];
            let total: f64 = vals.iter().filter(|&&v| v >= floor).sum();
            let mut best = 1;
            for jp in 1..=vals.len() {
                if vals[jp - 1] < floor {
                    break;
                }
                let mass: f64 = vals[..jp].iter().sum();
                if mass / total <= r_bar {
                    best = jp;
                }
            }
            assert_eq!(select_rank(&vals, r_bar).unwrap(), best, "r_bar {r_bar}");
        }
    }

    #[test]
    fn two_point_basis() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let b = SpectralBasis::fit(&x, SigmaRule::Fixed(1.0), RankRule::Fixed(1)).unwrap();
        let k12 = (-0.5f64).exp();
        assert!((b.eigvals()[0] - (1.0 + k12)).abs() < 1e-14);
        assert_eq!(b.mu()[0], b.eigvals()[0] / 2.0);
        assert_eq!(b.rank(), 1);
    }

    #[test]
    fn invalid_fixed_rank() {
        let x = randn(5, 1, 1);
        assert!(matches!(
            SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(0)),
            Err(Error::InvalidRank { rank: 0, max: 5 })
        ));
        assert!(matches!(
            SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(6)),
            Err(Error::InvalidRank { rank: 6, max: 5 })
        ));
    }

    #[test]
    fn full_rank_keeps_positive_spectrum() {
        let x = randn(8, 2, 2);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(8)).unwrap();
        assert_eq!(b.rank(), retained_count(b.spectrum()));
        assert!(b.eigvals().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn threshold_rank_is_compositional() {
        let x = randn(100, 1, 12);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Threshold(0.95)).unwrap();
        let sigma = kernel::median_bandwidth(&x).unwrap();
        let e = eigendecompose(&kernel::gram_matrix(&x, sigma)).unwrap();
        let vals: Vec<f64> = e.eigvals.iter().copied().collect();
        assert_eq!(b.rank(), select_rank(&vals, 0.95).unwrap());
        assert_eq!(b.sigma(), sigma);
    }

    #[test]
    fn interpolates_at_training_samples() {
        for (seed, m, d) in [(1u64, 10usize, 1usize), (2, 40, 2), (3, 25, 5)] {
            let x = randn(m, d, seed);
            let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Threshold(0.99)).unwrap();
            let psi = b.nystrom_eval(&x);
            let expected = b.eigvecs() * (m as f64).sqrt();
            assert!((psi - expected).amax() <= 1e-8);
        }
    }

    #[test]
    fn single_sample_eigenfunction() {
        // M = 1 cannot go through `fit` (bandwidth needs a pair); build directly.
        let x = DMatrix::from_element(1, 1, 0.3);
        let b = SpectralBasis::from_parts(x.clone(), Bandwidth::new(1.0).unwrap(), vec![1.0], DMatrix::from_element(1, 1, 1.0));
        assert_eq!(b.nystrom_eval(&x)[(0, 0)], 1.0);
        assert_eq!(b.kpca_embed(&x)[(0, 0)], 1.0);
    }

    #[test]
    fn nystrom_eval_matches_triple_loop() {
        let x = randn(30, 2, 4);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(5)).unwrap();
        let pts = randn(9, 2, 5);
        let psi = b.nystrom_eval(&pts);
        let s = b.sigma();
        let m = 30.0f64;
        for n in 0..9 {
            let p: Vec<f64> = pts.row(n).iter().copied().collect();
            for j in 0..b.rank() {
                let mut acc = 0.0;
                for q in 0..30 {
                    let xq: Vec<f64> = x.row(q).iter().copied().collect();
                    acc += b.eigvecs()[(q, j)] * kernel::rbf_eval(&p, &xq, s);
                }
                let oracle = m.sqrt() / b.eigvals()[j] * acc;
                assert!((psi[(n, j)] - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
            }
        }
    }

    #[test]
    fn nystrom_grad_matches_finite_differences() {
        let x = randn(40, 3, 6);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(6)).unwrap();
        let pts = randn(15, 3, 7);
        let g = b.nystrom_grad(&pts);
        let h = 1e-5;
        for n in 0..15 {
            for c in 0..3 {
                let mut plus = pts.rows(n, 1).into_owned();
                let mut minus = plus.clone();
                plus[(0, c)] += h;
                minus[(0, c)] -= h;
                let fp = b.nystrom_eval(&plus);
                let fm = b.nystrom_eval(&minus);
                for j in 0..b.rank() {
                    let fd = (fp[(0, j)] - fm[(0, j)]) / (2.0 * h);
                    let an = g.get(n, j, c);
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "({n},{j},{c}): {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn symmetric_pair_has_even_first_eigenfunction() {
        let a = 0.8;
        let x = DMatrix::from_column_slice(2, 1, &[-a, a]);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(1)).unwrap();
        let g = b.nystrom_grad(&DMatrix::from_element(1, 1, 0.0));
        assert!(g.get(0, 0, 0).abs() < 1e-15);
    }

    #[test]
    fn sign_flip_negates_gradients_and_keeps_squares() {
        let x = randn(20, 2, 8);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(4)).unwrap();
        let mut flipped = b.clone();
        flipped.flip_sign(2);
        let pts = randn(6, 2, 9);
        let (g, gf) = (b.nystrom_grad(&pts), flipped.nystrom_grad(&pts));
        let (p, pf) = (b.nystrom_eval(&pts), flipped.nystrom_eval(&pts));
        let (k, kf) = (b.kpca_embed(&pts), flipped.kpca_embed(&pts));
        for n in 0..6 {
            for j in 0..4 {
                let s = if j == 2 { -1.0 } else { 1.0 };
                for c in 0..2 {
                    assert_eq!(gf.get(n, j, c), s * g.get(n, j, c));
                }
                assert!((pf[(n, j)].powi(2) - p[(n, j)].powi(2)).abs() <= 1e-12);
                assert!((kf[(n, j)].powi(2) - k[(n, j)].powi(2)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn kpca_dual_formulas_agree() {
        let x = randn(35, 2, 10);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Threshold(0.99)).unwrap();
        let pts = randn(20, 2, 11);
        let xi = b.kpca_embed(&pts);
        let psi = b.nystrom_eval(&pts);
        let m = 35.0f64;
        for j in 0..b.rank() {
            let scale = (b.eigvals()[j] / m).sqrt();
            for n in 0..20 {
                assert!((xi[(n, j)] - scale * psi[(n, j)]).abs() <= 1e-10);
            }
        }
        // at training samples ξⱼ(xᵐ) = √λⱼ uⱼₘ
        let xi = b.kpca_embed(&x);
        for j in 0..b.rank() {
            for q in 0..35 {
                let expected = b.eigvals()[j].sqrt() * b.eigvecs()[(q, j)];
                assert!((xi[(q, j)] - expected).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn eigengap_uses_next_spectrum_value() {
        let x = randn(30, 1, 13);
        let b = SpectralBasis::fit(&x, SigmaRule::Median, RankRule::Fixed(3)).unwrap();
        let mu: Vec<f64> = b.spectrum().iter().map(|v| v / 30.0).collect();
        let expected = (0..3).map(|j| (mu[j] - mu[j + 1]).abs()).fold(f64::INFINITY, f64::min);
        assert!((b.eigengap() - expected).abs() < 1e-15);
    }
}
