use thiserror::Error;

use crate::units::ParseValueError;

/// Everything that can go wrong while building or analysing a circuit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("element {element} references node {node}, but the circuit has {node_count} nodes")]
    UnknownNode { element: usize, node: usize, node_count: usize },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("singular matrix at pivot {pivot}{context}")]
    Singular { pivot: String, context: String },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("time step fell below 1e-15 s at t = {time:.6e} s (worst node {node})")]
    Stall { time: f64, node: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no break port labelled `{0}`")]
    MissingBreakPort(String),

    #[error("load current {load:.6e} A is outside the {mode} mode range [{min:.6e}, {max:.6e}] A")]
    LoadOutOfRange { mode: &'static str, load: f64, min: f64, max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("netlist line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Value(#[from] ParseValueError),
}

impl Error {
    /// Coarse classification used for process exit codes.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::NoConvergence { .. } | Error::Stall { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
