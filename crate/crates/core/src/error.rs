use thiserror::Error;

/// Errors raised by the solver core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KgmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field does not live on this grid (expected {expected} nodes, found {found})")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite value in field at node {0}")]
    NonFinite(usize),

    #[error("potential violates V >= alpha > 0: min V = {min} at node {node}")]
    NonPositivePotential { min: f64, node: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("sampled table evaluated at s = {s}, outside its range [0, {max}]")]
    OutOfTableRange { s: f64, max: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("mountain-pass geometry not found: {0}")]
    Geometry(String),

    #[error("Nehari projection failed: {0}")]
    Projection(String),

    #[error("mountain-pass path collapsed: {0}")]
    PathCollapse(String),
}

pub type Result<T> = std::result::Result<T, KgmError>;
