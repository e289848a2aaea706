use thiserror::Error;

use crate::semiclassical::SemiclassicalSolution;
use crate::lindblad::TruncationStep;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// The reduced model has no nonlinear coupling, so quantities scaled by
    /// the critical amplitude are undefined.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("self-consistency did not converge after {iterations} iterations (residual {residual:.3e})")]
    SemiclassicalNoConvergence {
        iterations: usize,
        residual: f64,
        best: Box<SemiclassicalSolution>,
    },

    #[error("steady state is not unique: {0}")]
    DegenerateSteadyState(String),

    #[error("numerical failure: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("truncation did not converge before the capacity ceiling (last dims {last_dims:?})")]
    TruncationNotConverged {
        last_dims: (usize, usize),
        steps: Vec<TruncationStep>,
    },

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
