use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("invalid time grid: {0}")]
    TimeGrid(String),

    #[error("invalid Green's function bounds: {0}")]
    Greens(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("zero pivot in tridiagonal solve at row {row}")]
    ZeroPivot { row: usize },

    #[error("system matrix is not strictly diagonally dominant at row {row}")]
    NotDominant { row: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("split index K = {k} outside 0..={max}")]
    SplitIndex { k: usize, max: usize },

    #[error("reference solution did not reach tolerance {tol:e} (best estimate {achieved:e})")]
    OracleFailure { tol: f64, achieved: f64 },

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
