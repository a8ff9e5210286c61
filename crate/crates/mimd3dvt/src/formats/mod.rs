//! On-disk formats.

pub mod checkpoint;
pub mod instances;
pub mod manifest;
pub mod reports;
pub mod run_manifest;
pub mod volume;

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("header ends early")]
    TruncatedHeader,
    #[error("unsupported rank {0}")]
    Rank(usize),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u32),
    #[error("expected {expected} payload")]
    WrongDtype { expected: &'static str },
    #[error("dimensions overflow")]
    DimOverflow,
    #[error("truncated or oversized payload: expected {expected} bytes, found {actual}")]
    PayloadLength { expected: usize, actual: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Writes `bytes`, creating parent directories.
pub fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

pub fn write_json<T: serde::Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path)(FormatError::Invalid(e.to_string())))
}
