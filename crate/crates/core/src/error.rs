use thiserror::Error;

/// Errors raised by the numerical routines when a precondition does not hold.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty density")]
    EmptyDensity,

    #[error("density has no finite value")]
    EmptySupport,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("not a probability vector: {0}")]
    InvalidProbability(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),

    #[error("shift spaces differ (d={0}, gamma={1}) vs (d={2}, gamma={3})")]
    SpaceMismatch(usize, f64, usize, f64),

    #[error("jacobian depth {jacobian} exceeds measure depth {measure} + 1; refine the measure first")]
    JacobianTooDeep { jacobian: usize, measure: usize },

    #[error("invalid jacobian: {0}")]
    InvalidJacobian(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("enumeration of {leaves} words exceeds budget {budget}; try depth N = {suggested}")]
    OverBudget { leaves: u128, budget: u128, suggested: usize },

    #[error("ratio undefined: the two measures coincide")]
    IdenticalMeasures,

    #[error("word too short: need {needed} symbols, got {got}")]
    WordTooShort { needed: usize, got: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("grid is not closed under the pushforward: {0}")]
    GridNotClosed(String),

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
