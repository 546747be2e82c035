use thiserror::Error;

/// Errors produced by training, prediction, evaluation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid split plan: {0}")]
    InvalidPlan(String),

    #[error("metric {0} is undefined on an empty confusion matrix")]
    UndefinedMetric(&'static str),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}, column `{column}`: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("model parse error at line {line}, column {column}: {message}")]
    ModelParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
