use thiserror::Error;

/// Errors produced anywhere in the destriping pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cube file format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for this error class: configuration 2, I/O 3,
    /// numerical 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Param(_) | Error::Shape(_) => 2,
            Error::Io { .. } | Error::Format(_) => 3,
            Error::Numeric(_) | Error::Divergence { .. } => 4,
        }
    }
}
