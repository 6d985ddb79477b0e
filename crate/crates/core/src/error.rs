use thiserror::Error;

use crate::codec::Feature;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed ingestion text. `line` is 1-based, 0 when unknown.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed JSON that violates the record schema.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("{0} codewords need at least one segment")]
    EmptySequence(Feature),

    #[error("{feature} codewords unavailable: {reason}")]
    FeatureUnavailable { feature: Feature, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("timbre calibration failed: {0}")]
    Calibration(String),

    #[error("KL divergence undefined: symbol {0} has mass in p but none in q and no smoothing")]
    DivergenceUndefined(u32),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("transition matrix is reducible")]
    Reducible,

    #[error("synthetic spec error: {0}")]
    Spec(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
