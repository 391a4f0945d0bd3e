use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("evaluation at the kernel singularity x = 0")]
    Singular,

    #[error("eta = 0 is not a purely periodic mode")]
    ZeroFrequency,

    #[error("truncation failure: tolerance {tol:e} not reached with K <= {k_hard} (tail bound {tail:e})")]
    Truncation { tol: f64, k_hard: usize, tail: f64 },

    #[error("quadrature did not converge: value {value:e}, error estimate {estimate:e}")]
    Quadrature { value: f64, estimate: f64 },

    #[error("mode count mismatch: kernel has {kernel} modes, source has {sources}")]
    ModeMismatch { kernel: usize, sources: usize },

    #[error("forcing support too close to the box boundary: need margin {needed}, have {have}")]
    Margin { needed: f64, have: f64 },

    #[error("forcing amplitude {amplitude} exceeds the guard {guard}")]
    AmplitudeGuard { amplitude: f64, guard: f64 },

    #[error("Picard iteration diverged after {iterations} iterations (last change {last:e})")]
    Diverged { iterations: usize, last: f64, history: Vec<f64> },

    #[error("Picard iteration did not reach {tol:e} in {iterations} iterations (last change {last:e})")]
    NotConverged { iterations: usize, tol: f64, last: f64, history: Vec<f64> },

    #[error("cannot evaluate F_S at |x| = {radius} <= S = {s}")]
    InsideCutoff { radius: f64, s: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("underdetermined fit: {usable} usable samples ({excluded} below the error floor), need {needed}")]
    Underdetermined { usable: usize, excluded: usize, needed: usize },

    #[error("malformed field dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
