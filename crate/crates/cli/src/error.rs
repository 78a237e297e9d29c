use std::process::ExitCode;

use segfuse_core::Error as CoreError;

/// Command failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad parameters, mismatched grids, malformed tables or configs.
    #[error("{0}")]
    Validation(String),
    /// Missing, unreadable, unwritable or undecodable files.
    #[error("{0}")]
    Io(String),
    /// Some pipeline subjects failed; the others completed.
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Partial(_) => 3,
        })
    }

    /// Prefixes the message with some context, keeping the class.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
            CliError::Partial(m) => CliError::Partial(format!("{what}: {m}")),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(_) | CoreError::Nifti(_) => CliError::Io(e.to_string()),
            CoreError::InvalidVolume(_)
            | CoreError::GridMismatch(_)
            | CoreError::InvalidParameter(_)
            | CoreError::Validation(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(format!("malformed CSV: {e}"))
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(format!("malformed JSON: {e}"))
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
