use std::path::PathBuf;

/// A configuration key that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Solver(#[from] gcflow_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl AppError {
    /// Process exit status: 2 for solver and IO failures, 3 for bad configs.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::ConfigParse(_) | AppError::Config(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        AppError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
