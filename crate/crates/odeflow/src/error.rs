use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = RunError> = std::result::Result<T, E>;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical failure in {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: odeflow_core::Error,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl RunError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        RunError::Config { path: path.into(), message: message.into() }
    }

    pub fn numerical(context: impl Into<String>) -> impl FnOnce(odeflow_core::Error) -> RunError {
        let context = context.into();
        move |source| RunError::Numerical { context, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> RunError {
        let path = path.into();
        move |source| RunError::Io { path, source }
    }

    /// 2 for configuration errors, 3 for numerical failures, 4 for IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Numerical { .. } => 3,
            RunError::Io { .. } | RunError::Format { .. } => 4,
        }
    }
}
