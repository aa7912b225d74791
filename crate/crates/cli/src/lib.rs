//! Configuration, orchestration and artifact writing for the `scatlab` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod selftest;

pub use config::RunConfig;

use scatlab_core::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const NON_CONVERGENCE: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

/// Failure of a CLI run, tagged with the stage that failed.
#[derive(Debug)]
pub enum RunError {
    /// Bad flags, unreadable or invalid config.
    Invalid(String),
    Numerics {
        stage: &'static str,
        error: Error,
    },
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => exit::VALIDATION,
            RunError::Numerics { error, .. } if error.is_validation() => exit::VALIDATION,
            RunError::Numerics { error: Error::NonConvergence { .. }, .. } => exit::NON_CONVERGENCE,
            RunError::Numerics { .. } | RunError::Io(_) => exit::INTERNAL,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "invalid input: {m}"),
            RunError::Numerics { stage, error } => write!(f, "{stage} failed: {error}"),
            RunError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// Attaches a stage name to a numerical error.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, RunError>;
}

impl<T> Stage<T> for scatlab_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, RunError> {
        self.map_err(|error| RunError::Numerics { stage, error })
    }
}
