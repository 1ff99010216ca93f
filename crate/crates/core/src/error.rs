use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("construction unsupported: {0}")]
    ConstructionUnsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exhaustive enumeration needs {count} subsets (limit {limit}); use sampled mode")]
    CombinatorialBlowup { count: u128, limit: u128 },

    #[error("subset of workers is empty")]
    EmptySubset,

    #[error("regularizer {0} is not smooth; use the proximal solver")]
    NonSmoothRegularizer(&'static str),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("step size {alpha} is not below 1/M = {limit}")]
    StepTooLarge { alpha: f64, limit: f64 },

    #[error("consistency fault: {0}")]
    ConsistencyFault(String),

    #[error("objective {value} exceeded divergence guard {guard}")]
    Divergence { value: f64, guard: f64 },

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
