use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure classes. The CLI maps each class onto a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value that violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration record is malformed; `field` names the offending key.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// Input data (images, frame directories, checkpoints) is missing or unusable.
    #[error("data error: {0}")]
    Data(String),

    /// A NaN or infinity appeared where a finite value is required.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
