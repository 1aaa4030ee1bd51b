use std::path::PathBuf;

use thiserror::Error;

/// Failures of the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{origin}:{line}: {msg}")]
    Config {
        origin: String,
        line: usize,
        msg: String,
    },

    #[error("{origin}:{line}:{column}: {msg}")]
    Table {
        origin: String,
        line: usize,
        column: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] photon_bounds::Error),
}

impl CliError {
    /// Process exit code: 2 for usage, configuration and input errors, 3 for
    /// numerical failures (rejected designs, infeasible programs).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
