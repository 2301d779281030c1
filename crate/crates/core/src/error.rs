use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {difference:e}")]
    Asymmetric {
        row: usize,
        col: usize,
        difference: f64,
    },

    #[error("matrix is not positive definite: pivot {pivot} = {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("response outside the family domain: {0}")]
    Domain(String),

    #[error("fit diverged at iteration {iteration}: {reason} (objective trace: {trace:?})")]
    Divergence {
        iteration: usize,
        reason: String,
        trace: Vec<f64>,
    },

    #[error("maximum likelihood estimate does not exist: data are separated (iteration {iteration})")]
    Separation { iteration: usize },

    #[error("information matrix is singular; collinear coordinates {coordinates:?}")]
    RankDeficient { coordinates: Vec<usize> },

    #[error("non-finite statistic: {0}")]
    NonFinite(String),

    #[error("batch out of order: expected sequence number {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },

    #[error("experiment {0} already reached a terminal decision")]
    Terminal(String),

    #[error("no statistic has been computed yet")]
    NoData,

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("{file}:{line}:{column}: {message}")]
    Format {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Errors that reflect the data at hand (no estimate exists yet) rather
    /// than a bug or a numerical breakdown.
    pub fn is_data_dependent(&self) -> bool {
        matches!(
            self,
            Error::Separation { .. }
                | Error::RankDeficient { .. }
                | Error::Divergence { .. }
                | Error::NotPositiveDefinite { .. }
        )
    }
}
