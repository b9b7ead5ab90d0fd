use thiserror::Error;

/// Errors raised by the solvers and simulators.
///
/// Variants are split into two families: input validation (bad parameters,
/// states outside a table) and numerical failures (non-convergence,
/// singular systems, censoring). The CLI maps them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state ({k},{m},{n}) outside the computed range (N <= {limit})")]
    OutOfRange { k: u32, m: u32, n: u32, limit: u32 },

    #[error(
        "iterative solver did not converge: residual {residual:e} after {iterations} iterations"
    )]
    NoConvergence { residual: f64, iterations: usize },

    #[error("singular 2x2 matrix at N = {level} (determinant {det:e})")]
    Singular { level: u32, det: f64 },

    #[error("F_N ill-conditioned at N = {level} (condition estimate {condition:e})")]
    IllConditioned { level: u32, condition: f64 },

    #[error("tail summation did not settle within L_max = {l_max} (last change {change:e})")]
    TailNotConverged { l_max: u32, change: f64 },

    #[error("{censored} of {reps} replicates censored at the event cap")]
    Censored { censored: u64, reps: u64 },

    #[error("non-positive substitution rate {tau} at d = {d}")]
    NonPositiveRate { tau: f64, d: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the caller's input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::OutOfRange { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
