use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("dataset is empty after filtering")]
    EmptyDataset,

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("group coverage error: {0}")]
    GroupCoverage(String),

    #[error("synthetic spec error: {0}")]
    Spec(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("incomplete p-value grid: {0}")]
    IncompleteGrid(String),

    #[error("trial {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
