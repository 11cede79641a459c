use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-smooth conjugate: gamma and the strong convexity of h are both zero")]
    NonSmoothConjugate,

    #[error("no strongly concave component: mu_H and mu_h are both zero")]
    NoStrongConcavity,

    #[error("non-finite iterate at epoch {epoch}: {context}")]
    NonFinite { epoch: usize, context: String },

    #[error("estimator advanced past the end of the epoch (n = {n})")]
    EstimatorExhausted { n: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("label {label} at row {row} is not -1 or +1")]
    InvalidLabel { row: usize, label: f64 },

    #[error("no exact maximizer oracle and no inner-solve tolerance supplied")]
    NoOracle,

    #[error("empty trace")]
    EmptyTrace,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
