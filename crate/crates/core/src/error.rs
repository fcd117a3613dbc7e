use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the statistics, transforms and file formats in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed cell in a dataset file. Rows are 1-based data rows (the header is row 0),
    /// columns are 1-based.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("grouping sum {sum} ≠ {columns} columns")]
    GroupingMismatch { sum: usize, columns: usize },

    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("multivariate margins need exact Monte Carlo: margin {margin} has {width} columns")]
    MultivariateMargin { margin: usize, width: usize },

    #[error("reference key mismatch: expected {expected}, file has {found}")]
    KeyMismatch { expected: String, found: String },

    #[error("malformed reference file: {0}")]
    ReferenceFormat(String),

    /// A squared statistic came out below the numerical tolerance for zero.
    #[error("internal consistency: squared statistic {value} < -1e-9")]
    NegativeStatistic { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
