use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical routines and the dataset layer.
#[derive(Debug, Error)]
pub enum BwError {
    /// Input outside the domain of the operation (indefinite, singular, bad level, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimension or length mismatch.
    #[error("shape error: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// Spectral functional undefined because the operator has rank at most one.
    #[error("rank error: {0}")]
    Rank(String),

    /// Barycenter weights are all zero (or negative / non-finite).
    #[error("weight error: {0}")]
    Weight(String),

    /// The bootstrap could not draw a usable weight vector within its attempt budget.
    #[error("degenerate resample: {attempts} attempts exhausted while collecting {wanted} replicates")]
    DegenerateResample { attempts: usize, wanted: usize },

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] IoError),
}

/// Failures of dataset persistence.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure on {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse failure in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("checksum mismatch for {path}: manifest {expected}, file {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("dimension mismatch in {path}: expected {expected}x{expected}, got {rows}x{cols}")]
    Dim {
        path: PathBuf,
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("manifest inconsistent: {0}")]
    Manifest(String),
}

impl BwError {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        BwError::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, BwError>;
