use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("track parse error at line {line}: {message}")]
    TrackParse { line: usize, message: String },

    #[error("track validation failed: {0}")]
    TrackValidation(String),

    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("network structure error: {0}")]
    Structure(String),

    #[error("car is inside a wall at ({x:.1}, {y:.1})")]
    CarInWall { x: f64, y: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: msg.into(),
        }
    }

    /// True for errors that stem from user configuration rather than runtime failures.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::TrackParse { .. } | Error::TrackValidation(_)
        )
    }
}
