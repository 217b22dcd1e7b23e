//! Standard-library companion to `nlm-core`: dataset, checkpoint, config
//! and log formats, evaluation reports and the `nlm` command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod facts;
pub mod log;
pub mod tensor_io;

use std::process::ExitCode;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const CONFIG: u8 = 2;
    pub const RUNTIME: u8 = 3;
    pub const VERIFICATION: u8 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    /// Bad flags, config files or incompatible inputs.
    #[error("config error: {0}")]
    Config(String),
    /// IO, malformed files or a failed training run.
    #[error("{0}")]
    Runtime(String),
    /// A verification suite reported failures.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Error::Config(_) => exit::CONFIG,
            Error::Runtime(_) => exit::RUNTIME,
            Error::Verification(_) => exit::VERIFICATION,
        })
    }

    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Runtime(format!("{}: {e}", path.display()))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
