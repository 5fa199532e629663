use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no records")]
    NoRecords,

    #[error("duplicate entry: {0}")]
    Duplicate(String),

    #[error("topic {0} not found")]
    TopicNotFound(String),

    #[error("topic coverage mismatch; missing topics: {}", .0.join(", "))]
    MissingTopics(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("regressor fit did not converge after {iterations} iterations (theta0 = {theta0}, theta1 = {theta1})")]
    NonConvergence { iterations: usize, theta0: f64, theta1: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
