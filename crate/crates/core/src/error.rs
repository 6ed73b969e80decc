use thiserror::Error;

use crate::series::Violation;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("series failed validation: {}", format_violations(.0))]
    InvalidSeries(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Cholesky factorization failed even after diagonal jitter: {0}")]
    CholeskyFailure(String),

    #[error("AR coefficients define a non-stationary process")]
    NonStationaryCoefficients,

    #[error("ARMS envelope failure: {0}")]
    EnvelopeFailure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(
        "chains failed to converge: R-hat {last_rhat:.4} > {threshold} after {sweeps} sweeps"
    )]
    ConvergenceFailure {
        sweeps: usize,
        last_rhat: f64,
        threshold: f64,
        /// (sweep, max R-hat) pairs recorded at each check.
        history: Vec<(usize, f64)>,
    },

    #[error("posterior sample is empty")]
    EmptyPosterior,

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("GLM fit diverged: deviance kept increasing after step halving")]
    Divergence,

    #[error("GLM fit did not converge")]
    NotConverged,

    #[error("cross-validation failed for every candidate: {0:?}")]
    CvFailed(Vec<(f64, String)>),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
