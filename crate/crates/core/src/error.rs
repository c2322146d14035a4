use thiserror::Error;

/// Errors shared by every numeric and symbolic routine in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("no convergence after {terms} terms (tail estimate {tail:e})")]
    NonConverged { terms: usize, tail: f64 },
}

pub type QResult<T> = Result<T, QError>;
