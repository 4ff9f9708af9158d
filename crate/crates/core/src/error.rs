use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("count table is empty (N = 0)")]
    EmptyCounts,

    #[error("length mismatch: {observed} observed vs {expected} expected values")]
    LengthMismatch { observed: usize, expected: usize },

    #[error("chi-square fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
