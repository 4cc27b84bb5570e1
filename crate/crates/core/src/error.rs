use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("median pairwise distance is zero; too many duplicate samples")]
    DegenerateSamples,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error("symmetric eigensolver did not converge")]
    EigensolverFailure,

    #[error("spectrum has no positive mass (largest eigenvalue {0})")]
    AllZeroSpectrum(f64),

    #[error("invalid rank {rank}: must lie in 1..={max}")]
    InvalidRank { rank: usize, max: usize },

    #[error("eigenvalue mass threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),

    #[error("regularized kernel system is not positive definite")]
    SingularSystem,

    #[error("log density is not finite at the initial state")]
    NonFiniteEnergy,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
