use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} at index {index} is not a probability distribution (sum = {sum})")]
    NotDistribution {
        what: &'static str,
        index: usize,
        sum: f64,
    },

    #[error("reward r({state}, {action}) = {value} lies outside [0, 1]")]
    RewardOutOfRange { state: usize, action: usize, value: f64 },

    #[error("state {state}, action {action} is outside the domain")]
    OutOfDomain { state: usize, action: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("failure probability {0} must lie in (0, 1/e]")]
    InvalidDelta(f64),

    #[error("dataset has n = {0} samples per step; at least 5 are needed for a non-empty validation split")]
    DatasetTooSmall(usize),

    #[error("normal equations are singular")]
    SingularSystem,

    #[error("classes {first} and {second} are not nested: {reason}")]
    NotNested {
        first: usize,
        second: usize,
        reason: &'static str,
    },

    #[error("{0} is not supported for this class variant")]
    Unsupported(&'static str),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("malformed dataset: {0}")]
    MalformedDataset(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
