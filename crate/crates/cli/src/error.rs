use thiserror::Error;

/// Failures surfaced by the command-line tool, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable files, malformed CSV, unknown columns, inconsistent flags.
    #[error("input error: {0}")]
    Input(String),
    /// Rank deficiency and estimator failures.
    #[error("numeric error: {0}")]
    Numeric(#[from] yfwl_core::Error),
    #[error("out of memory: {0}")]
    OutOfMemory(String),
    #[error("equivalence check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) | CliError::OutOfMemory(_) => 3,
            CliError::CheckFailed(_) => 4,
        }
    }
}
