//! Runner behind the `sobolevlab` command: JSON suites in, JSON and CSV
//! reports out, plus a small object store for describe and export.

pub mod config;
pub mod ops;
pub mod run;
pub mod store;
pub mod suites;

use std::fmt;

/// Errors surfaced by the command line. Usage errors exit with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NotFound(String),
    Io(String),
    Lab(sobolev_lab::LabError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::NotFound(m) => write!(f, "not found: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Lab(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<sobolev_lab::LabError> for CliError {
    fn from(e: sobolev_lab::LabError) -> Self {
        CliError::Lab(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
