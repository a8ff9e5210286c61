use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::formats::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad flags or configuration; exit code 2.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Core(mimd_core::Error),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(io::Error) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Io { path, source }
    }

    pub fn format(path: impl AsRef<Path>) -> impl FnOnce(FormatError) -> Error {
        let path = path.as_ref().to_path_buf();
        move |source| Error::Format { path, source }
    }
}

impl From<mimd_core::Error> for Error {
    fn from(e: mimd_core::Error) -> Self {
        match e {
            mimd_core::Error::Config(msg) => Error::Usage(format!("invalid configuration: {msg}")),
            other => Error::Core(other),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub fn runtime(msg: impl Into<String>) -> Error {
    Error::Runtime(msg.into())
}
