use thiserror::Error;

/// Errors raised by the map, operator, cone and ergodic layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QdsError {
    #[error("{what} = {value} lies outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("index {index} exceeds length {len}")]
    Index { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter {alpha} exceeds admissibility bound {beta_star}")]
    Inadmissible { alpha: f64, beta_star: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{what} supports at most {cap}, got {got}")]
    CapExceeded {
        what: &'static str,
        cap: usize,
        got: usize,
    },
}

pub type Result<T, E = QdsError> = std::result::Result<T, E>;

pub(crate) fn check_unit<T: crate::Real>(what: &'static str, x: T) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(QdsError::Domain {
            what,
            value: x.as_f64(),
            domain: "[0, 1]",
        })
    }
}
