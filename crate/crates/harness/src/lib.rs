//! Experiment harness around `sfw-core`: JSON-configured training runs,
//! compression sweeps, grid selection, and verification subcommands.

pub mod config;
pub mod run;
pub mod select;
pub mod snapshot;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid or inconsistent configuration; exits with code 2.
    #[error("config error: {0}")]
    Config(String),
    /// A verification or invariant check failed; exits with code 1.
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] sfw_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
