use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has full column rank {rank}; no null space exists")]
    NoNullSpace { rank: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("channel norm {0:e} is below tolerance")]
    ZeroChannel(f64),
    #[error("latent code is empty")]
    EmptyLatent,
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged at iteration {iteration} (loss {loss})")]
    DivergedTraining { iteration: usize, loss: f64 },
    #[error("degenerate image means (product {0:e}); normalized MSE undefined")]
    DegenerateMean(f64),
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("malformed IDX file: {0}")]
    MalformedIdx(String),
    #[error("inconsistent image dimensions: {0}")]
    InconsistentDims(String),
    #[error("missing checkpoint for latent length {latent_length}: {path}")]
    MissingCheckpoint { latent_length: usize, path: PathBuf },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure { path: path.into(), source }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch { expected: expected.to_string(), actual: actual.to_string() }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch { expected: expected.to_string(), actual: actual.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
