//! CLI error classes mapped to process exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// malformed or inconsistent configuration (exit 2)
    #[error("config error: {0}")]
    Config(String),
    /// a numerical task failed (exit 3)
    #[error("task failed: {0}")]
    Task(String),
    /// filesystem or serialization failure (exit 4)
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Task(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
