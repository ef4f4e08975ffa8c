use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("invalid exponent {0}: exponents must lie in (0, inf]")]
    InvalidExponent(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation not supported on {model} model: {what}")]
    Unsupported { model: String, what: String },

    #[error("operand is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("operand is not positive (minimal eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("operand is not in the algebra A (defect {0:.3e})")]
    NotInAlgebra(f64),

    #[error("operand is singular: smallest singular value {smallest:.3e} below floor {floor:.3e}")]
    Singular { smallest: f64, floor: f64 },

    #[error("Fuglede-Kadison determinant vanishes (log-singular values hit the floor); {0}")]
    ZeroDeterminant(String),

    #[error("ill-conditioned Gram system (condition {0:.3e} exceeds 1e12)")]
    IllConditioned(f64),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
