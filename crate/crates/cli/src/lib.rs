//! Command-line runner: JSON configs in, CSV tables and JSON reports out.

pub mod config;
pub mod pipelines;
pub mod suites;

use std::fmt;

/// Runner failure, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Config schema or field validation (exit 2).
    Schema(String),
    /// A module contract was violated (exit 3).
    Contract(String),
    /// A resource guard fired (exit 4).
    Resource(String),
    /// Output could not be written (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Contract(_) => 3,
            CliError::Resource(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "config error: {m}"),
            CliError::Contract(m) => write!(f, "contract violation: {m}"),
            CliError::Resource(m) => write!(f, "resource limit: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<hyperperc::Error> for CliError {
    fn from(e: hyperperc::Error) -> Self {
        use hyperperc::Error;
        match e {
            Error::Invalid(_) | Error::Dimension(..) => CliError::Schema(e.to_string()),
            Error::Contract(m) => CliError::Contract(m),
            Error::Resource(m) => CliError::Resource(m),
        }
    }
}
