use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 16")]
    InvalidGridSize(usize),

    #[error("grid size mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },

    #[error("non-finite value {value} at node {index} in {context}")]
    NonFinite {
        context: &'static str,
        index: usize,
        value: f64,
    },

    #[error("cannot project onto the unit sphere: rho has zero L2 norm")]
    ZeroNorm,

    #[error("step {step} at t = {t} produced non-finite values; try a smaller dt")]
    StepFailure { step: usize, t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported test function: {0}")]
    UnsupportedTestFunction(String),

    #[error("time {t} outside the available range [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
