use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; names the offending field(s).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or inconsistent dataset.
    #[error("data error: {0}")]
    Data(String),

    /// A sampler block or density term produced a non-finite value.
    #[error("numerical failure in {block} at iteration {iteration:?}: {detail}")]
    Numerical {
        block: String,
        iteration: Option<usize>,
        detail: String,
    },

    /// One subset chain of a partitioned fit failed.
    #[error("subset {index} failed: {source}")]
    Subset {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(block: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical {
            block: block.into(),
            iteration: None,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage/config/data problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::Estimation(_) => 2,
            Error::Subset { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
