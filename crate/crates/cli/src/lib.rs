//! Command implementations behind the `czsob` binary.

pub mod commands;
pub mod config;
pub mod oracle;
pub mod output;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration and inputs.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn run(e: impl std::fmt::Display) -> Self {
        CliError::Run(e.to_string())
    }
}
