use num_complex::Complex64;
use thiserror::Error;

use crate::model::ComplexFreq;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation at {at} lies within {distance:.3e} of a pole")]
    PoleProximity { at: ComplexFreq, distance: f64 },

    #[error("root finder did not converge after {iterations} iterations")]
    RootNonConvergence { iterations: usize, partial: Vec<Complex64> },

    #[error("root verification failed: |value| = {residual:.3e} at {at}")]
    RootVerification { at: ComplexFreq, residual: f64 },

    #[error("step size underflow at t = {t} (problem may be stiff)")]
    Stiffness { t: f64 },

    #[error("numerical instability at t = {t:.6e}; retry with a step smaller than {dt:.3e}")]
    Instability { t: f64, dt: f64 },

    #[error("envelope dynamic range e^{exponent:.1} exceeds e^50")]
    EnvelopeOverflow { exponent: f64 },

    #[error("no input energy has been injected")]
    ZeroInput,

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("eigenfrequency tracking lost a branch at sweep index {index}: found {found} modes")]
    LostBranch { index: usize, found: usize },

    #[error("run protocols do not match: {0}")]
    ProtocolMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Configuration and parameter errors map to exit code 2; everything else is numerical.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_) | Error::Json(_))
    }
}
