use thiserror::Error;

/// Errors reported by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("periodicity error: {0}")]
    Periodicity(String),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("nonlinear iteration did not converge after {iterations} iterations (update history: {history:?})")]
    NonlinearDivergence { iterations: usize, history: Vec<f64> },
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
