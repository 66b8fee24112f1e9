use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid measure: {component}: {reason}")]
    InvalidMeasure { component: String, reason: String },

    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),

    #[error("invalid branching characteristics: {component}: {reason}")]
    InvalidBranching { component: String, reason: String },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("exponent undefined: {0}")]
    ExponentUndefined(String),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("infinite activity: {0}")]
    InfiniteActivity(String),

    #[error("degenerate estimator: {0}")]
    Degenerate(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
