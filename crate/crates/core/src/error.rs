use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { what: &'static str, iterations: usize, residual: f64 },

    #[error("quadrature failed to reach tolerance (achieved {achieved:.3e})")]
    Quadrature { achieved: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("monotone iteration lost ordering at iterate {iteration}: {detail}")]
    OrderViolation { iteration: usize, detail: String },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("empty domain: {0}")]
    EmptyDomain(String),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Quadrature { .. }
                | Error::OrderViolation { .. }
                | Error::Singular(_)
                | Error::Infeasible(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
