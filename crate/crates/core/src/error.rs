use thiserror::Error;

/// Errors raised by the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error at row {row}, column '{column}': cannot read '{value}' as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("logit domain error: risk value {value} at period '{period}' is outside (0, 1)")]
    LogitDomain { period: String, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid graph operation: {0}")]
    Graph(String),

    #[error("synthetic generation failed: {0}")]
    Synthesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
