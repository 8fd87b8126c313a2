use std::io;
use std::path::PathBuf;

use clozealign_core::ErrorKind;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Data {
        path: PathBuf,
        #[source]
        source: clozealign_core::Error,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] clozealign_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn data(path: impl Into<PathBuf>, source: clozealign_core::Error) -> Self {
        CliError::Data {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for bad data or
    /// files, 4 for statistics that are undefined on the data. Errors raised
    /// while reading a file count as data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Format { .. } => 3,
            CliError::Data { source, .. } => match source.kind() {
                ErrorKind::Degenerate => 4,
                _ => 3,
            },
            CliError::Core(source) => match source.kind() {
                ErrorKind::Argument => 2,
                ErrorKind::Data => 3,
                ErrorKind::Degenerate => 4,
            },
        }
    }
}
