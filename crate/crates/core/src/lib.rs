//! Score-function estimation from samples.
//!
//! Given i.i.d. draws from a distribution whose density is unavailable, the
//! [`ssge`] module estimates `∇ₓ log q(x)` as a truncated expansion in
//! Nyström-approximated eigenfunctions of an RBF kernel operator. The
//! estimate is a function: it can be evaluated at any point, not just at the
//! samples it was fitted on.
//!
//! Around the estimator sit:
//!
//! - [`kernel`]: RBF kernel values, gradients, Gram matrices and the median
//!   bandwidth heuristic.
//! - [`spectral`]: Gram eigendecomposition, rank selection, Nyström
//!   eigenfunctions and their gradients, kernel PCA embeddings.
//! - [`stein`]: the ridge-regression Stein estimator and its refit-based
//!   out-of-sample extension, used as a baseline.
//! - [`oracles`]: analytic targets with samplers and exact scores.
//! - [`entropy`]: entropy gradients of reparameterized samplers.
//! - [`hmc`]: Hamiltonian Monte Carlo driven by a pluggable score.
//! - [`eval`]: error metrics on evaluation grids.
//!
//! ```
//! use spectral_score::oracles::Oracle;
//! use spectral_score::ssge::{ScoreEstimator, SsgeConfig};
//! use spectral_score::spectral::RankRule;
//!
//! let target = Oracle::standard_normal(1);
//! let samples = target.sample(100, 7);
//! let config = SsgeConfig { rank: RankRule::Fixed(6), ..Default::default() };
//! let est = ScoreEstimator::fit(&samples, &config).unwrap();
//! let g = est.score_at(&[1.0]);
//! assert!(g[0] < 0.0);
//! ```

pub mod entropy;
pub mod error;
pub mod eval;
pub mod hmc;
pub mod kernel;
pub mod oracles;
pub mod rng;
pub mod spectral;
pub mod ssge;
pub mod stein;
pub mod tensor;

pub use error::{Error, Result};

/// An `M × d` matrix of samples, one draw per row.
pub type SampleMatrix = nalgebra::DMatrix<f64>;
