use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("flux derivative did not converge at phi/phi0 = {phi}: close to the half-flux singularity")]
    FluxSingular { phi: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("singular linear system (condition estimate {cond:e})")]
    Singular { cond: f64 },

    #[error("no root bracketed in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("step size underflow at t = {t:e} s")]
    StepUnderflow { t: f64 },

    #[error("signal segment too short: {0}")]
    SegmentTooShort(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("denominator vanishes: {0}")]
    Pole(String),
}
