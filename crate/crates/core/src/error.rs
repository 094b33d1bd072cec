use thiserror::Error;

use crate::params::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("the denominator of k vanishes for these (gamma, a, rho)")]
    ZeroDenominator,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("t = {t} is within {guard} of the horizon {horizon}; consumption diverges there")]
    TerminalSingularity { t: f64, horizon: f64, guard: f64 },

    #[error("parameter validation failed: {}", .0.summary())]
    ValidationFailed(Box<ValidationReport>),

    #[error("RK4 step {step} exceeds the maximum 1e-2")]
    StepTooLarge { step: f64 },

    #[error("PDE solve unstable at t = {t}, y = {y}: value {value}")]
    InstabilityDetected { t: f64, y: f64, value: f64 },

    #[error("control outside the admissible set: {0}")]
    AdmissibilityViolation(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
