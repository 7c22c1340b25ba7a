use thiserror::Error;

use crate::kernels::HyperParams;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-triangle face {face} with {arity} vertices")]
    NonTriangleFace { face: usize, arity: usize },

    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    FaceIndexOutOfRange { face: usize, index: usize, count: usize },

    #[error("degenerate face {face} (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("mesh is disconnected: vertex {vertex} unreachable from vertex {source_vertex}")]
    Disconnected { source_vertex: usize, vertex: usize },

    #[error("vertex index {index} out of range for {count} vertices")]
    VertexOutOfRange { index: usize, count: usize },

    #[error("requested {requested} eigenpairs but operator has dimension {available}")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("mass matrix entry {index} is not positive ({value:e})")]
    NonPositiveMass { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("factorization failed after maximum jitter for {theta:?}")]
    Factorization { theta: HyperParams },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("simulation became unstable at step {step}")]
    Unstable { step: usize },

    #[error("simulation left the admissible range at step {step}: u = {value}")]
    OutOfRange { step: usize, value: f64 },

    #[error("stability guard violated: dt*D*lambda_max = {value:.4} > 2")]
    StabilityGuard { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
