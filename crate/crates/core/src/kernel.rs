//! RBF kernel `k(x, y) = exp(-‖x − y‖² / (2σ²))` and the quantities built
//! from it.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::tensor::Tensor3;
use crate::{Error, Result, SampleMatrix};

/// RBF bandwidth σ, in the units of the sample coordinates.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_finite() && sigma > 0.0 {
            Ok(Self(sigma))
        } else {
            Err(Error::InvalidBandwidth(sigma))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

#[inline]
pub(crate) fn sq_dist_rows(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut acc = 0.0;
    for c in 0..a.ncols() {
        let diff = a[(i, c)] - b[(j, c)];
        acc += diff * diff;
    }
    acc
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Median of the `M(M−1)/2` pairwise Euclidean distances between rows.
///
/// For an even number of pairs the two central order statistics are
/// averaged. Fails with [`Error::DegenerateSamples`] when the median is zero.
pub fn median_bandwidth(samples: &SampleMatrix) -> Result<Bandwidth> {
    let m = samples.nrows();
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: m });
    }
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            dists.push(sq_dist_rows(samples, i, samples, j).sqrt());
        }
    }
    let n = dists.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let median = if n % 2 == 1 {
        *dists.select_nth_unstable_by(n / 2, cmp).1
    } else {
        let (lower, upper, _) = dists.select_nth_unstable_by(n / 2, cmp);
        let upper = *upper;
        // the lower middle is the max of everything left of the upper middle
        let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median <= 0.0 {
        return Err(Error::DegenerateSamples);
    }
    Bandwidth::new(median)
}

pub fn rbf_eval(x: &[f64], y: &[f64], sigma: Bandwidth) -> f64 {
    let s = sigma.value();
    (-sq_dist(x, y) / (2.0 * s * s)).exp()
}

/// `∇ₓ k(x, y) = −(x − y)/σ² · k(x, y)`. The gradient in `y` is the negation.
pub fn rbf_grad_first(x: &[f64], y: &[f64], sigma: Bandwidth) -> Vec<f64> {
    let s2 = sigma.value() * sigma.value();
    let k = rbf_eval(x, y, sigma);
    x.iter().zip(y).map(|(a, b)| -(a - b) / s2 * k).collect()
}

/// Gram matrix over the sample rows. The upper triangle is computed and
/// mirrored so the result is exactly symmetric.
pub fn gram_matrix(samples: &SampleMatrix, sigma: Bandwidth) -> DMatrix<f64> {
    let m = samples.nrows();
    let denom = 2.0 * sigma.value() * sigma.value();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        k[(i, i)] = 1.0;
        for j in (i + 1)..m {
            let v = (-sq_dist_rows(samples, i, samples, j) / denom).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `N × M` matrix of `k(xₙ, xᵐ)`.
pub fn cross_kernel(points: &DMatrix<f64>, samples: &SampleMatrix, sigma: Bandwidth) -> DMatrix<f64> {
    let denom = 2.0 * sigma.value() * sigma.value();
    DMatrix::from_fn(points.nrows(), samples.nrows(), |n, m| {
        (-sq_dist_rows(points, n, samples, m) / denom).exp()
    })
}

/// Kernel values between query points and samples, plus the gradient of
/// each value with respect to the query point.
///
/// Returns the `N × M` matrix of `k(xₙ, xᵐ)` and the `N × M × d` tensor of
/// `∇ₓ k(xₙ, xᵐ)`.
pub fn cross_kernel_and_grads(
    points: &DMatrix<f64>,
    samples: &SampleMatrix,
    sigma: Bandwidth,
) -> (DMatrix<f64>, Tensor3) {
    let (n, m, d) = (points.nrows(), samples.nrows(), samples.ncols());
    assert_eq!(points.ncols(), d, "points and samples must share a dimension");
    let s2 = sigma.value() * sigma.value();
    let kx = cross_kernel(points, samples, sigma);

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut row = vec![0.0; m * d];
            for q in 0..m {
                let kv = kx[(p, q)];
                for c in 0..d {
                    row[q * d + c] = -(points[(p, c)] - samples[(q, c)]) / s2 * kv;
                }
            }
            row
        })
        .collect();

    let mut grads = Tensor3::zeros(n, m, d);
    for (p, row) in rows.iter().enumerate() {
        for q in 0..m {
            grads.fiber_mut(p, q).copy_from_slice(&row[q * d..(q + 1) * d]);
        }
    }
    (kx, grads)
}
