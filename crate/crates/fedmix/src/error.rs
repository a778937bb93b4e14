//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, data parsing, solver configuration
/// and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("no data")]
    NoData,

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("iteration cap {0} exceeded before reaching tolerance")]
    IterationCap(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv schema mismatch: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter { .. } | Error::Parse { .. } => 2,
            Error::IterationCap(_) | Error::NonFinite { .. } => 3,
            _ => 1,
        }
    }
}
