//! Experiment runner: solver, oracle and network-simulation runs driven by
//! JSON configs, writing plot-ready CSV and JSON.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 non-convergence,
//! 3 verification failure.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{run, Command, RunArgs};
pub use config::{Overrides, RunConfig};

/// Failures with a dedicated exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Verification(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Verification(_) => 3,
        }
    }
}

/// Exit code for an error returned by [`run`].
pub fn exit_code(e: &anyhow::Error) -> i32 {
    e.downcast_ref::<CliError>().map_or(1, CliError::exit_code)
}
