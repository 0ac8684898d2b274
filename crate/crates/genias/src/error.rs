//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeniasError {
    #[error("parse error in {path} at row {row}, column {col}: {reason}")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training aborted at epoch {epoch}: non-finite {component} loss ({value})")]
    TrainingAbort {
        epoch: usize,
        component: String,
        value: f64,
    },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, GeniasError>;

impl GeniasError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        GeniasError::Io {
            path: path.into(),
            source,
        }
    }
}
