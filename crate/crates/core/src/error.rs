use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by the library.
///
/// Variants are grouped by how callers should react: argument/config problems,
/// data-format problems, and numerical failures. The CLI maps these groups to
/// distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate slice state: {0}")]
    DegenerateSlice(String),

    #[error("chain failure at iteration {iteration}: {message}")]
    ChainFailure { iteration: usize, message: String },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("component collapse: {0}")]
    ComponentCollapse(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported feature: {0}")]
    Unsupported(String),

    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn corrupt(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Corrupt { path: path.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
