use std::path::{Path, PathBuf};

use una_core::noise::NoiseError;
use una_core::{DetectionError, TideError, ValidationError};

use crate::coco::FormatError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: FormatError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Tide(#[from] TideError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error("injected dataset failed validation: {0}")]
    Validation(#[from] ValidationError),
    #[error("diff does not reconcile with the injection log:\n  {}", .0.join("\n  "))]
    Reconcile(Vec<String>),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn input(path: &Path, source: FormatError) -> Self {
        Error::Input { path: path.to_path_buf(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
