use thiserror::Error;

use crate::homogeneous::DiagonalMetric;
use crate::kahler::PotentialState;
use crate::surface::ConformalState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("metric is not Einstein with constant {lambda}: residual {residual:e}")]
    NotEinstein { lambda: f64, residual: f64 },

    /// Adaptive step size collapsed before any stop condition fired.
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, last: DiagonalMetric },

    #[error("non-finite conformal factor at t = {t}")]
    SurfaceBlowUp { t: f64, last: Box<ConformalState> },

    #[error("complex Hessian metric lost positivity at t = {t}")]
    KahlerBlowUp { t: f64, last: Box<PotentialState> },

    #[error("metric g0 + ddbar u is not positive definite at grid point {index} (min eigenvalue {min_eig:e})")]
    DegenerateMetric { index: usize, min_eig: f64 },

    #[error("right-hand side has nonzero mean {mean:e}")]
    InconsistentState { mean: f64 },

    #[error("check inapplicable: {0}")]
    Inapplicable(String),

    #[error("point outside trajectory span: {0}")]
    OutOfSpan(String),

    #[error("degenerate covector (xi = 0)")]
    DegenerateCovector,

    #[error("Newton iteration failed to converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for the variants that represent a numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::SurfaceBlowUp { .. }
                | Error::KahlerBlowUp { .. }
                | Error::DegenerateMetric { .. }
                | Error::NoConvergence { .. }
                | Error::InconsistentState { .. }
        )
    }
}
