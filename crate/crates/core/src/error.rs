use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("step budget exhausted after {steps} steps at t = {t}")]
    StepLimit { steps: usize, t: f64 },

    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("time {t} outside trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("coefficient radicand non-positive ({radicand}) at u = {u}: eccentricity too large for this energy")]
    Radicand { radicand: f64, u: f64 },

    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("bump profile violates an invariant: {0}")]
    Bump(String),

    #[error("orthogonal arrival check failed: {0}")]
    Orthogonality(String),

    #[error("mode mismatch: {0}")]
    Mode(String),

    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
