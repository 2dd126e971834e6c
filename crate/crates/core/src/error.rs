use thiserror::Error;

/// Errors produced by parameter validation and the numerical evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Adaptive quadrature ran out of subdivisions before reaching the
    /// requested tolerance. Carries the error estimate that was achieved.
    #[error("quadrature did not converge after {subdivisions} subdivisions: \
             achieved error {achieved:.3e} exceeds target {target:.3e}")]
    QuadratureDidNotConverge {
        achieved: f64,
        target: f64,
        subdivisions: usize,
    },

    /// A probability integral landed outside [0, 1] by more than the
    /// configured absolute tolerance, which indicates a broken integrand
    /// rather than harmless roundoff.
    #[error("probability estimate {value} lies outside [0, 1] beyond the absolute tolerance {abs_tol:.3e}")]
    ProbabilityOutOfRange { value: f64, abs_tol: f64 },

    /// Latency statistics are undefined when the per-mini-slot success
    /// probability is zero (no detection can ever occur).
    #[error("expected latency is undefined: per-slot success probability is zero")]
    UndefinedLatency,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
