use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(alloc::string::String),
    #[error("state {x} is below the domain guard x_min = {x_min}")]
    Domain { x: f64, x_min: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("regime index {index} outside 0..{n_regimes}")]
    RegimeOutOfRange { index: usize, n_regimes: usize },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("singular linear system")]
    Singular,
    #[error("probability vector is not on the simplex")]
    InvalidMeasure,
    #[error("too many regimes ({n}) for the brute-force simplex oracle (max {max})")]
    TooManyRegimes { n: usize, max: usize },
    #[error("window [{start}, {end}] lies outside the trajectory horizon [0, {horizon}]")]
    WindowOutOfRange { start: f64, end: f64, horizon: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
