use thiserror::Error;

/// Errors raised by the library. The CLI maps every variant to exit code 1
/// except [`Error::Usage`] and [`Error::Json`], which map to 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid space specification: {0}")]
    InvalidSpec(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("empty sample list")]
    EmptySamples,

    #[error("point index {index} out of range for a space with {size} points")]
    IndexOutOfRange { index: usize, size: usize },

    /// The candidate set handed to a Fréchet solver was empty.
    #[error("candidate set is empty")]
    EmptyDomain,

    /// A one-sided or two-sided Hausdorff quantity was asked of an empty set.
    #[error("set argument is empty")]
    EmptySet,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid Markov kernel: {0}")]
    InvalidKernel(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
