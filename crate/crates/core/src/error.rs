use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or indices that do not fit together.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or insufficient input data.
    #[error("data error: {0}")]
    Data(String),

    /// An API was called outside its contract.
    #[error("contract error: {0}")]
    Contract(String),

    /// Training produced a non-finite loss.
    #[error("numerical divergence at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    /// A numerical check (such as a gradient comparison) failed.
    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("file error at {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error at {path}: {detail}")]
    Image { path: PathBuf, detail: String },
}

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 0 is success; 1 usage/config; 2 data (including I/O); 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Dimension(_) => 1,
            Error::Data(_) | Error::File { .. } | Error::Image { .. } => 2,
            Error::Divergence { .. } | Error::Numerical(_) => 3,
        }
    }
}
