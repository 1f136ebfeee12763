use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FexError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("point is not a member (margin {margin:.3e})")]
    NotMember { margin: f64 },
    #[error("direction admits no nontrivial dilation")]
    NoDilation,
    #[error("point is already an Arveson extreme point")]
    AlreadyArveson,
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FexError>;

impl From<serde_json::Error> for FexError {
    fn from(e: serde_json::Error) -> Self {
        FexError::Parse(e.to_string())
    }
}
