//! Command failures and their exit codes.

use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or inconsistent options.
    #[error("{0}")]
    Config(String),
    /// Inputs that cannot be read, parsed or matched up.
    #[error(transparent)]
    Data(unimatte_core::Error),
    #[error("{} prediction(s) missing: {}", .ids.len(), .ids.join(", "))]
    MissingPredictions { ids: Vec<String> },
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 1,
            CliError::Data(_) | CliError::MissingPredictions { .. } => 2,
            CliError::Internal(_) => 3,
        })
    }
}

impl From<unimatte_core::Error> for CliError {
    fn from(e: unimatte_core::Error) -> Self {
        match e {
            unimatte_core::Error::Tensor(t) => CliError::Internal(t.to_string()),
            other => CliError::Data(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
