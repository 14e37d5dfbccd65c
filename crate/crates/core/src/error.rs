use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} must be strictly positive, found {value} at index {index:?}")]
    NonPositive { what: &'static str, index: Vec<usize>, value: f64 },

    #[error("{what} must be non-negative, found {value} at index {index}")]
    Negative { what: &'static str, index: usize, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension { what: &'static str, expected: usize, found: usize },

    #[error("invalid power bounds at index {index}: {reason}")]
    Bounds { index: usize, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("power iteration did not converge in {iterations} iterations (last estimate {estimate})")]
    NotConverged { iterations: usize, estimate: f64 },

    #[error("utility gradient must be strictly positive, found {value} at index {index}")]
    UtilityContract { index: usize, value: f64 },

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("line search found no ascent after {halvings} halvings at iteration {iteration}")]
    LineSearch { iteration: usize, halvings: usize },

    #[error("empty sample set")]
    EmptySamples,

    #[error("utility is not log-concave at the starting point (largest eigenvalue {worst_eig})")]
    NotLogConcave { worst_eig: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
