use thiserror::Error;

/// Errors produced by the labelcraft library.
#[derive(Debug, Error)]
pub enum Error {
    /// A required CSV column is absent.
    #[error("schema error: missing column `{0}`")]
    Schema(String),

    /// A cell could not be parsed. `row` is 1-based and excludes the header.
    #[error("parse error at row {row}, column `{column}`: cannot parse `{value}`")]
    Parse { row: usize, column: String, value: String },

    /// A row violates a record invariant.
    #[error("validation error at row {row}: {reason}")]
    Validation { row: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    /// An operation was called before a required fit step.
    #[error("invalid state: {0}")]
    State(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
