use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures that end a run. Usage problems exit with 1, everything caused
/// by the data or the file system exits with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::File { .. } | CliError::Data(_) => 2,
        }
    }

    pub fn file(path: &Path, message: impl ToString) -> Self {
        CliError::File {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn data(message: impl ToString) -> Self {
        CliError::Data(message.to_string())
    }
}

impl From<prodtraj::ingest::IngestError> for CliError {
    fn from(e: prodtraj::ingest::IngestError) -> Self {
        use prodtraj::ingest::IngestError;
        match e {
            IngestError::Io { path, source } => CliError::file(&path, source),
            IngestError::Malformed { path, line, message } => {
                CliError::file(&path, format!("line {line}: {message}"))
            }
            other => CliError::data(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
