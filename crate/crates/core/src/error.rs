use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// eta at 0 or 1, where the population minimizer diverges.
    #[error("boundary probability {0}: minimizer diverges")]
    Boundary(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate weights: all working weights are zero")]
    DegenerateWeights,

    #[error("degenerate bandwidth: {0}")]
    ZeroBandwidth(String),

    #[error("single-class data: {0}")]
    SingleClass(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("metric domain error: {0}")]
    MetricDomain(String),

    #[error("{path}: line {line}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, line: u64, reason: String },

    #[error("{path}: line {line}: invalid label {value:?} (expected -1 or 1)")]
    BadLabel { path: PathBuf, line: u64, value: String },

    #[error("{path}: line {line}: ragged row: expected {expected} fields, found {found}")]
    RaggedRow { path: PathBuf, line: u64, expected: usize, found: usize },

    #[error("{path}: line {line}: bad number {value:?}")]
    BadNumber { path: PathBuf, line: u64, value: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidInput(_) => "invalid-input",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Boundary(_) => "boundary",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::DegenerateWeights => "degenerate-weights",
            Error::ZeroBandwidth(_) => "zero-bandwidth",
            Error::SingleClass(_) => "single-class",
            Error::Calibration(_) => "calibration",
            Error::MetricDomain(_) => "metric-domain",
            Error::MalformedHeader { .. } => "malformed-header",
            Error::BadLabel { .. } => "bad-label",
            Error::RaggedRow { .. } => "ragged-row",
            Error::BadNumber { .. } => "bad-number",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {v}")))
    }
}
