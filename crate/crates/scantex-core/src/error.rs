//! Crate-wide error type.

use std::path::PathBuf;

/// All failure modes surfaced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// File missing or unreadable.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Unsupported or corrupt encoding, bad container contents.
    #[error("format error: {0}")]
    Format(String),
    /// Shape or size constraint violated.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// Parameter outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Text input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Record-level invariant violated (e.g. morph without a morph tool).
    #[error("consistency error: {0}")]
    Consistency(String),
    /// Reed-Solomon correction capacity exceeded.
    #[error("uncorrectable: {0}")]
    Uncorrectable(String),
    /// Expected structure absent (e.g. no QR finder patterns).
    #[error("not found: {0}")]
    NotFound(String),
    /// Requested layout cannot fit.
    #[error("layout error: {0}")]
    Layout(String),
    /// Scanned sheet did not segment into the expected structure.
    #[error("segmentation error: {0}")]
    Segmentation(String),
    /// Filter bank has the wrong shape or contents.
    #[error("bank error: {0}")]
    Bank(String),
    /// Kernel matrix constraint violated (e.g. nonzero coefficient sum).
    #[error("kernel error: {0}")]
    Kernel(String),
    /// A numeric decomposition failed to converge.
    #[error("convergence error: {0}")]
    Convergence(String),
    /// Training data contains only one class.
    #[error("training data contains a single class")]
    SingleClass,
    /// NaN or infinity where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// A metric needs at least one sample of a class that is absent.
    #[error("empty class: {0}")]
    EmptyClass(String),
    /// Too few distinct subjects for a disjoint split.
    #[error("insufficient subjects: need {needed}, got {got}")]
    InsufficientSubjects { needed: usize, got: usize },
    /// Too few distinct morph tools for leave-one-out folds.
    #[error("insufficient morph tools: need at least 2, got {got}")]
    InsufficientTools { got: usize },
    /// Serialized artifact written by an incompatible version.
    #[error("version mismatch: expected {expected}, got {got}")]
    Version { expected: String, got: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
