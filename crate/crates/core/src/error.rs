use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// More stationary points than a single phase transition allows.
    #[error("hypothesis of at most three stationary points violated at delta={delta}: roots {roots:?}")]
    TooManyStationaryPoints { delta: f64, roots: Vec<f64> },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("state space too large: {states} configurations exceeds limit {limit}")]
    StateSpaceTooLarge { states: f64, limit: usize },

    #[error("invalid coupling geometry: {0}")]
    InvalidGeometry(String),

    #[error("link probability {value} outside (0, 1) for {which}")]
    ProbabilityOutOfRange { which: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
