use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid input: exit code 2.
    #[error("{0}")]
    Input(String),
    /// Valid input beyond what the requested method can handle: exit code 3.
    #[error("{0}")]
    Capability(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Input(_) => ExitCode::from(2),
            Self::Capability(_) => ExitCode::from(3),
        }
    }
}

impl From<contagion_core::Error> for CliError {
    fn from(e: contagion_core::Error) -> Self {
        use contagion_core::Error::*;
        match e {
            SizeCapExceeded { .. } | SearchLimitOverflow { .. } => Self::Capability(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}
