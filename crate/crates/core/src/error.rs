use thiserror::Error;

/// Errors raised by the controller, the trigger and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The feasible polytope of a QP is empty. `row` is the most violated
    /// constraint row at the point where infeasibility was detected.
    #[error("QP infeasible (most violated row {row}, residual {residual:.3e})")]
    Infeasible { row: usize, residual: f64 },

    #[error("QP numerical failure: {0}")]
    NumericalFailure(String),

    #[error("state outside the safe set: barrier {barrier} has h = {value:.6e}")]
    StateOutsideSafeSet { barrier: usize, value: f64 },

    #[error("degenerate CLF gradient: L_g V vanishes")]
    DegenerateGradient,

    #[error("barrier {barrier} constraint negative at update instant: zeta = {value:.6e}")]
    NonpositiveMargin { barrier: usize, value: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
