use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Mesh {
        path: PathBuf,
        #[source]
        source: meshnoise::Error,
    },

    #[error(transparent)]
    Core(#[from] meshnoise::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::Mesh { source: e, .. } if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
