use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed dataset: {0}")]
    Format(String),

    #[error("row {row}: expected {expected} intensity values, found {found}")]
    Arity {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: `{value}` is not a number")]
    NotNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row}: compound `{class}` is not in the configured class whitelist")]
    UnknownClass { row: usize, class: String },

    #[error("class `{class}` has {count} instances, fewer than the {folds} requested folds")]
    ClassTooSmall {
        class: String,
        count: usize,
        folds: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("neighborhood graph with k={k} is disconnected: {component_count} components (sizes {sizes:?})")]
    Disconnected {
        k: usize,
        component_count: usize,
        sizes: Vec<usize>,
    },

    #[error("clusters {a} and {b} have coincident centroids")]
    CoincidentCentroids { a: usize, b: usize },

    #[error("training set contains a single class")]
    SingleClass,

    #[error("SMO did not converge after {iterations} iterations (violating-pair gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
