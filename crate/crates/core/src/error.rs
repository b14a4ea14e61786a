use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
///
/// The CLI maps these onto exit codes through [`Error::is_config`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("no slice images found in {0}")]
    EmptyStack(PathBuf),
    #[error("{path}: {detail}")]
    SliceMismatch { path: PathBuf, detail: String },
    #[error("raw volume size mismatch: expected {expected}, got {actual}")]
    RawSize { expected: u64, actual: u64 },
    #[error("unsupported bit depth {0} (expected 8 or 16)")]
    BitDepth(u32),
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("no initialization voxels")]
    NoInitVoxels,
    #[error("insufficient samples for class {class} (n = {n})")]
    InsufficientSamples { class: &'static str, n: u64 },
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad parameters rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::BitDepth(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
