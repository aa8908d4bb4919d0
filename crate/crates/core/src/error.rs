use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("matrix is near-singular (smallest eigenvalue {min_eig:e}, threshold {threshold:e})")]
    NearSingular { min_eig: f64, threshold: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
