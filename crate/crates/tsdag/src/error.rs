//! Error types shared across the crate.

use thiserror::Error;

/// Errors from tensor construction and arithmetic.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TensorError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
}

/// Errors from dataset ingestion and generation.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid dataset spec: {0}")]
    Spec(String),
    #[error("insufficient data: need more than {required} rows, have {available}")]
    InsufficientData { required: usize, available: usize },
    #[error("missing noise record: dataset was not produced by the generator")]
    MissingNoiseRecord,
    #[error("SNR target {target} not reached after {steps} bisection steps (best {best})")]
    SnrConvergence { target: f64, steps: usize, best: f64 },
}

/// Errors from graph serialization.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown variable {name:?} in edge {index}")]
    UnknownVariable { name: String, index: usize },
    #[error("edge {index} has lag {lag} outside [0, {l_max}]")]
    LagOutOfRange {
        index: usize,
        lag: usize,
        l_max: usize,
    },
    #[error("edge {index} has negative weight {weight}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

/// Errors from metric computation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("edge-set mode mismatch: {pred} vs {truth}")]
    ModeMismatch { pred: String, truth: String },
    #[error("variable count mismatch: {pred} vs {truth}")]
    VariableMismatch { pred: usize, truth: usize },
}
