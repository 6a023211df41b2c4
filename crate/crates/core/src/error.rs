use thiserror::Error;

use crate::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
    #[error("empty memory")]
    EmptyMemory,
    #[error("number of neighbors k must be positive")]
    ZeroK,
    #[error("empty neighborhood")]
    EmptyNeighborhood,
    #[error("empty training data")]
    EmptyData,
    #[error("class {0} is already registered")]
    DuplicateClass(ClassId),
    #[error("class {class} is not registered (layer has {n_classes} classes)")]
    UnknownClass { class: ClassId, n_classes: usize },
    #[error("class ids must be registered in order: next id is {expected}, got {actual}")]
    NonContiguousClass { expected: ClassId, actual: ClassId },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("failed to write results: {0}")]
    Output(String),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Failures while restoring a binary snapshot.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },
    #[error("truncated stream: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after snapshot")]
    TrailingBytes(usize),
    #[error("invalid snapshot: {0}")]
    Invalid(String),
}
