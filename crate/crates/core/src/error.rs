use std::fmt;

use crate::eigen::EigenResult;

pub type Result<T> = std::result::Result<T, Error>;

/// Grid point where a pointwise condition failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Point {
    pub i: usize,
    pub j: usize,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at {0}")]
    NonFinite(Point),

    #[error("metric is not positive definite at {0}")]
    NonPositiveDefinite(Point),

    #[error("invalid p = {0}, must be >= 1")]
    InvalidP(f64),

    #[error("denominator vanishes ({0:e})")]
    ZeroDenominator(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("eigensolver did not converge after {} iterations (residual {:e})", .0.iters, .0.residual)]
    NotConverged(Box<EigenResult>),

    #[error("comparison pole reached at t = {t} (pole at {pole})")]
    PoleReached { t: f64, pole: f64 },

    #[error("flow requires a conformal-factor representation of the metric")]
    MissingConformalFactor,

    #[error("time step {dt:e} exceeds the stability bound {limit:e}")]
    StabilityViolation { dt: f64, limit: f64 },

    #[error("metric equivalence bound violated at t = {t}, point {point}")]
    BoundViolated { t: f64, point: Point },

    #[error("index {index} out of range for trace of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("eigenfunction violates the normalization constraints ({0})")]
    NotNormalized(String),

    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(key: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }

    /// Strips any `AtTime` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }
}
