use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("nyquist violation: need xi_max >= {required:.3}, grid has {available:.3} (use at least {min_points} points per axis)")]
    Nyquist { required: f64, available: f64, min_points: usize },
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("{stage} did not converge (residual {residual:.3e})")]
    NonConvergence { stage: String, residual: f64 },
    #[error("quadrature range error: {0}")]
    Range(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("experiment design error: {0}")]
    Design(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Nyquist { .. } | Error::Resolution(_) | Error::GridMismatch | Error::Design(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
