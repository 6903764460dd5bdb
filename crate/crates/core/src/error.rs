use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AdaptelError>;

#[derive(Debug, Error)]
pub enum AdaptelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("frame {index} is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    FrameMismatch {
        index: usize,
        expected_w: u32,
        expected_h: u32,
        found_w: u32,
        found_h: u32,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("malformed label file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl AdaptelError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AdaptelError::Io {
            path: path.into(),
            source,
        }
    }
}
