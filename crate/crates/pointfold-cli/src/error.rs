//! CLI error type with machine-parseable codes and process exit codes.

use std::path::PathBuf;

/// Result alias for the CLI crate.
pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Configuration problems: bad keys, bad values, missing referenced
    /// files. Exit code 2, emitted before any output is written.
    #[error("{0}")]
    Config(String),

    /// File IO failures, with the path that caused them.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Parse failures in one of the supported formats.
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Engine-level failures propagated from the core crate.
    #[error(transparent)]
    Engine(#[from] pointfold::Error),

    /// A verification command found a violation.
    #[error("{0}")]
    Verify(String),
}

impl CliError {
    /// Short machine-parseable code for the `ERROR <code>: <message>` line.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "CONFIG",
            CliError::Io { .. } => "IO",
            CliError::Format { .. } => "FORMAT",
            CliError::Engine(_) => "ENGINE",
            CliError::Verify(_) => "VERIFY",
        }
    }

    /// Process exit code: 2 for configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

pub(crate) fn format_err(
    path: impl Into<PathBuf>,
    line: usize,
    message: impl Into<String>,
) -> CliError {
    CliError::Format {
        path: path.into(),
        line,
        message: message.into(),
    }
}
