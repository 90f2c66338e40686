use std::io;

use thiserror::Error;

use crate::mapping::Side;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{side} feature index {index} out of range (have {len} features)")]
    FeatureIndex { side: Side, index: usize, len: usize },

    #[error("{side} id {id} out of range (have {len})")]
    EntityIndex { side: Side, id: usize, len: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
