use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid node pair ({i}, {j}) for n = {n}")]
    InvalidNodePair { i: usize, j: usize, n: usize },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("{what} of size {size} exceeds the budget of {limit}")]
    Capacity {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("symmetric eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },
    #[error("integration produced a non-finite state at t = {t}")]
    Integration { t: f64 },
    #[error("topology is disconnected")]
    Disconnected,
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
