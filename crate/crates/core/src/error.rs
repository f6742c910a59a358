use thiserror::Error;

/// Errors raised by the fitting pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spline order must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("domain bounds are invalid: lower ({0}) must be strictly below upper ({1})")]
    InvalidBounds(f64, f64),

    #[error("interior knots must be strictly increasing (knot {index} = {value} follows {previous})")]
    NonIncreasingKnots { index: usize, value: f64, previous: f64 },

    #[error("interior knot {value} lies on or outside the domain [{lower}, {upper}]")]
    KnotOutsideDomain { value: f64, lower: f64, upper: f64 },

    #[error("point {value} lies outside the domain [{lower}, {upper}]")]
    OutOfDomain { value: f64, lower: f64, upper: f64 },

    #[error("basis index {index} out of range for order {order} (valid: 0..{count})")]
    IndexOutOfRange { index: usize, order: usize, count: usize },

    #[error("observation points must be strictly increasing (point {index} = {value} follows {previous})")]
    NonIncreasingPoints { index: usize, value: f64, previous: f64 },

    #[error("duplicate observation point {0}")]
    DuplicatePoint(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is rank deficient: {0}")]
    RankDeficient(String),

    /// Carries the best iterate found so that callers can inspect it.
    #[error("solver did not converge at lambda = {lambda} after {iterations} steps (KKT residual {residual:e})")]
    NonConvergence { lambda: f64, iterations: usize, residual: f64, best_beta: Vec<f64> },

    #[error("knot count {count} exceeds the maximum {max}")]
    KnotCountExceedsMax { count: usize, max: usize },

    #[error("{params} coefficients exceed the {n} observations")]
    Overparameterized { params: usize, n: usize },

    #[error("every candidate combination is overparameterized ({0} cells skipped)")]
    AllOverparameterized(usize),

    #[error("constant truth: the evaluation range f_max - f_min is zero")]
    ConstantTruth,

    #[error("empty set passed to a set distance")]
    EmptySet,

    #[error("I/O error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
