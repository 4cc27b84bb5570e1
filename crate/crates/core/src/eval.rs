//! Error metrics for comparing estimated scores against exact ones.

use nalgebra::{DMatrix, DVector};

/// `n` evenly spaced points on `[lo, hi]` as an `n × 1` matrix.
pub fn linspace(lo: f64, hi: f64, n: usize) -> DMatrix<f64> {
    match n {
        0 => DMatrix::zeros(0, 1),
        1 => DMatrix::from_element(1, 1, lo),
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            DMatrix::from_fn(n, 1, |i, _| if i == n - 1 { hi } else { lo + h * i as f64 })
        }
    }
}

/// Squared error per row, averaged over coordinates.
fn row_sq_errors(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(estimate.shape(), truth.shape(), "estimate and truth shapes differ");
    let d = estimate.ncols() as f64;
    (0..estimate.nrows())
        .map(|n| (estimate.row(n) - truth.row(n)).norm_squared() / d)
        .collect()
}

/// `q`-weighted mean squared error on a set of evaluation points.
///
/// Weights are `q(xₙ)` normalized to sum to one, computed from an
/// unnormalized log density, so on an even grid this is a quadrature of
/// `∫ |ĝ − g|² q dx` (averaged over coordinates).
pub fn weighted_mse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, log_density: &DVector<f64>) -> f64 {
    let errs = row_sq_errors(estimate, truth);
    assert_eq!(errs.len(), log_density.len());
    let top = log_density.max();
    let w: Vec<f64> = log_density.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    errs.iter().zip(&w).map(|(e, w)| e * w).sum::<f64>() / total
}

/// Plain mean squared error over the rows selected by `keep`.
pub fn masked_mse<F>(points: &DMatrix<f64>, estimate: &DMatrix<f64>, truth: &DMatrix<f64>, keep: F) -> f64
where
    F: Fn(&[f64]) -> bool,
{
    let errs = row_sq_errors(estimate, truth);
    let mut acc = 0.0;
    let mut count = 0usize;
    for (n, e) in errs.iter().enumerate() {
        let x: Vec<f64> = points.row(n).iter().copied().collect();
        if keep(&x) {
            acc += e;
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        acc / count as f64
    }
}

/// Plain mean squared error over all rows.
pub fn mse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    let errs = row_sq_errors(estimate, truth);
    errs.iter().sum::<f64>() / errs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-4.0, 4.0, 201);
        assert_eq!(g.nrows(), 201);
        assert_eq!(g[(0, 0)], -4.0);
        assert_eq!(g[(200, 0)], 4.0);
        assert_eq!(g[(100, 0)], 0.0);
    }

    #[test]
    fn weighted_mse_weights_by_density() {
        let pts = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let truth = DMatrix::zeros(2, 1);
        let est = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        // weights ∝ (1, e^{-1/2})
        let logq = DVector::from_vec(vec![0.0, -0.5]);
        let w0 = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((weighted_mse(&est, &truth, &logq) - w0).abs() < 1e-15);
        assert_eq!(masked_mse(&pts, &est, &truth, |x| x[0] > 0.5), 0.0);
        assert_eq!(mse(&est, &truth), 0.5);
    }
}
