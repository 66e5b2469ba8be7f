//! Batch front end for the quadruped terrain-sensing simulator.
//!
//! The binary exposes four subcommands that together form a reproducible
//! pipeline: `defaults` prints a complete scenario configuration,
//! `simulate` runs a seeded batch of trials into a run directory,
//! `analyze` turns the trial logs into a per-step estimates table, and
//! `evaluate` scores the estimates into a JSON report plus plot tables.
//! Every stage is deterministic: same config, same bytes.

use thiserror::Error;

pub mod commands;
pub mod logfmt;
pub mod manifest;

/// Failure classes, one per process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 2: unreadable, unparsable, or invalid configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Exit 3: the simulation itself failed.
    #[error("simulation error: {0}")]
    Sim(String),
    /// Exit 4: a trial log is missing, truncated, or corrupt.
    #[error("malformed log: {0}")]
    MalformedLog(String),
    /// Exit 5: inputs that must agree do not (stale config hash, estimates
    /// that reference unknown trials).
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sim(_) => 3,
            CliError::MalformedLog(_) => 4,
            CliError::Mismatch(_) => 5,
        }
    }
}
