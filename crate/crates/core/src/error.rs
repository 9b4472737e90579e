use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("resolution {0} is below the minimum of 3 nodes per axis")]
    Resolution(usize),

    #[error("grid too coarse: h = {h:.3e} exceeds {limit:.3e} required at A = {amplitude}")]
    UnderResolved { h: f64, limit: f64, amplitude: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("right-hand side has mean {mean:.3e}, periodic system requires mean zero")]
    IncompatibleRhs { mean: f64 },

    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("eigenvector iterate changed sign ({negative} of {total} entries negative)")]
    SignChange { negative: usize, total: usize },

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("no grid nodes found on the separatrix")]
    EmptySeparatrix,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
