use thiserror::Error;

/// Errors raised by spline construction, the knot solvers and the decision engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument `{field}`: {message}")]
    InvalidArgument { field: &'static str, message: String },

    /// The moment system has no ordered positive solution at this knot count.
    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("iteration limit reached after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    /// Two tracked knots merged before the continuation reached its target.
    #[error("knot path collision at grown knot {at:e}")]
    PathCollision { at: f64 },

    #[error("numerical failure at stage {stage}: {message}")]
    NumericalFailure { stage: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            message: message.into(),
        }
    }

    pub(crate) fn numerical(stage: usize, message: impl Into<String>) -> Self {
        Error::NumericalFailure {
            stage,
            message: message.into(),
        }
    }

    /// True for errors that stem from floating point trouble rather than the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MaxIterations { .. } | Error::PathCollision { .. } | Error::NumericalFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
