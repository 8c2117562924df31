use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no real gamma for q={q}, kappa={kappa}: discriminant {discriminant} < 0")]
    NoRealGamma { q: f64, kappa: f64, discriminant: f64 },

    #[error("invalid curve point M={m}, gamma={gamma}: {reason}")]
    InvalidCurve { m: u32, gamma: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero pivot C00 at ({i}, {j})")]
    ZeroPivot { i: usize, j: usize },

    #[error("non-finite coefficient at ({i}, {j})")]
    Overflow { i: usize, j: usize },

    #[error(
        "series tail {tail:.3e} exceeds tolerance {tol:.1e} at r={r}; max admissible r for this order is {max_r:.6}"
    )]
    TailCheck { r: f64, tail: f64, tol: f64, max_r: f64 },

    #[error("{0}")]
    NonPositive(String),

    #[error("hypergeometric: {0}")]
    Hypergeometric(String),

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("eigen solver did not converge\n{matrix}")]
    NoConvergence { matrix: String },

    #[error("eigen solver: {0}")]
    Eigen(String),

    #[error("loewner step underflow: |z - u| = {distance:.3e}")]
    StepUnderflow { distance: f64 },

    #[error("non-finite Monte Carlo sample at path {index}")]
    SampleOverflow { index: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
