use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate tail: {0}")]
    DegenerateTail(String),

    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient regression grid: {points} points (need at least {needed})")]
    InsufficientGrid { points: usize, needed: usize },

    #[error("exploration probability 1 gives an exponential tail, no finite power-law exponent")]
    ExponentialRegime,

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("render error in series '{series}': {reason}")]
    Render { series: String, reason: String },

    #[error("i/o error on {path}: {source}")]
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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
