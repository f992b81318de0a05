use std::path::PathBuf;

use streampred_core::error::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema version mismatch: file has version {found}, this build reads version {expected}")]
    Version { found: u64, expected: u64 },
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{file}: {source}")]
    InFile {
        file: PathBuf,
        #[source]
        source: Box<AppError>,
    },
}

impl AppError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        AppError::Validation { path: path.into(), message: message.into() }
    }

    pub fn in_file(self, file: impl Into<PathBuf>) -> Self {
        AppError::InFile { file: file.into(), source: Box::new(self) }
    }

    /// 2 for anything the user can fix in their inputs, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Version { .. } | AppError::Validation { .. } | AppError::Usage(_) => 2,
            AppError::Core(CoreError::Validation { .. } | CoreError::Config(_)) => 2,
            AppError::InFile { source, .. } => source.exit_code(),
            AppError::Io { .. } | AppError::Core(_) => 1,
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
