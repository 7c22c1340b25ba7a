use std::path::PathBuf;

use stgp_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {msg}")]
    Csv { path: PathBuf, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(CoreError),

    #[error("{0}")]
    Invalid(CoreError),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration and input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Factorization { .. }
            | CoreError::Numerical(_)
            | CoreError::Unstable { .. }
            | CoreError::OutOfRange { .. } => CliError::Numerical(e),
            other => CliError::Invalid(other),
        }
    }
}
