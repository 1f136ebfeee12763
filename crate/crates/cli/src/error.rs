use fex_core::FexError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const OUTSIDE: i32 = 3;
    pub const UNDECIDED: i32 = 4;
    pub const INVARIANT: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] FexError),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("verification failed at check `{name}`: {detail}")]
    Verify { name: String, detail: String },
    #[error("invariant failure: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(FexError::Parse(_) | FexError::Shape(_) | FexError::Domain(_) | FexError::Precondition(_)) => exit::USAGE,
            CliError::Core(FexError::NotMember { .. }) => exit::OUTSIDE,
            CliError::Core(FexError::InvariantViolation(_)) | CliError::Invariant(_) => exit::INVARIANT,
            CliError::Core(_) | CliError::Verify { .. } => exit::FAILURE,
            CliError::Io { .. } => exit::USAGE,
        }
    }
}
