use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("infeasible cache budget: M = {m} exceeds N_f = {n_f}")]
    InfeasibleBudget { m: usize, n_f: usize },

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (value {value:e}, error estimate {error:e})"
    )]
    QuadratureNonConvergence {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("probability {value} outside [0, 1] beyond tolerance in {context}")]
    ProbabilityOutOfRange { value: f64, context: &'static str },

    #[error("{solver} did not converge after {iterations} iterations (best {best})")]
    SolverNonConvergence {
        solver: &'static str,
        iterations: usize,
        best: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors that signal a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonConvergence { .. }
                | Error::ProbabilityOutOfRange { .. }
                | Error::SolverNonConvergence { .. }
        )
    }
}
