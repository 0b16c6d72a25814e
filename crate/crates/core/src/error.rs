use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum PplsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("rank deficient: expected rank {expected}, found {found}")]
    RankDeficient { expected: usize, found: usize },

    #[error("parameter constraints violated: {0}")]
    Validation(ValidationReport),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = PplsError> = std::result::Result<T, E>;
