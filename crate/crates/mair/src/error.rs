//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto exit codes: configuration and input problems
/// exit with 2, numeric failures with 3, everything else with 1.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad dimensions, empty grids, out-of-range hyperparameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid runtime input (label out of range, length mismatch, empty dataset).
    #[error("input error: {0}")]
    Input(String),

    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A file could not be parsed; `offset` is the byte position of the failure.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the CLI: 2 for config/input/parse problems, 3 for
    /// numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Parse { .. } => 2,
            Error::Numeric(_) => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
