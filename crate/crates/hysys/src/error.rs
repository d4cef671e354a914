use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("unknown edge {0}")]
    UnknownEdge(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point not contained in space: coordinate {index} = {value} outside its interval")]
    Containment { index: usize, value: f64 },
    #[error("domain/codomain mismatch: {0}")]
    Mismatch(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
