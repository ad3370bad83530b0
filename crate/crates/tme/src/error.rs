use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a permutation: {0}")]
    NotBijective(String),

    #[error("degenerate single-particle spectrum: |eigenvalue| = {min_abs:.3e} below gap tolerance {tol:.1e}")]
    Degenerate { min_abs: f64, tol: f64 },

    #[error("sign path unresolved at t = {t:.6} after {steps} steps")]
    Unresolved { t: f64, steps: usize },

    #[error("dimension {dim} exceeds the oracle limit {max}")]
    TooLarge { dim: usize, max: usize },

    #[error("coincident points {0} and {1}")]
    Coincident(usize, usize),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("zero acceptance in Monte Carlo chain")]
    ZeroAcceptance,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
