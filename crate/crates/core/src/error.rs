use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {element}: {reason}")]
    BadElement { element: usize, reason: String },

    #[error("mesh parse error: {0}")]
    MeshParse(#[from] serde_json::Error),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector at node {node} is not unit length (|m| = {norm})")]
    NotUnit { node: usize, norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Cholesky factorization failed at pivot {pivot} (value {value:e}); matrix is not SPD")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("tangency violated at node {node}: |v.m| = {violation:e}")]
    TangencyViolation { node: usize, violation: f64 },

    #[error("GMRES breakdown after {iterations} iterations (residual {residual:e})")]
    Breakdown { iterations: usize, residual: f64 },

    #[error("GMRES produced a non-finite value after {iterations} iterations")]
    NonFinite { iterations: usize },

    #[error("GMRES did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular dense system: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
