use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error at row {row}: {msg}")]
    Ingestion { row: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("degenerate distances: {0}")]
    DegenerateDistance(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("numerical divergence at layer {layer}")]
    Divergence { layer: usize },

    #[error("dense size {dim} exceeds cap {cap}; use the matrix-free diffusion instead")]
    Size { dim: usize, cap: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("group support: {0}")]
    GroupSupport(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("serialization error on {path}: {msg}")]
    Serde { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than numerics.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Divergence { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
