use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate field: {0}")]
    DegenerateField(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate plane: the two vectors are linearly dependent")]
    DegeneratePlane,

    #[error("vector is neither horizontal nor vertical")]
    Classification,

    #[error("full tensor assembly needs 1-dimensional fibers, got v_dim = {v_dim}")]
    UnsupportedAssembly { v_dim: usize },

    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),

    #[error("jet order exhausted: order {required} required, {available} available")]
    OrderExhausted { required: usize, available: usize },

    #[error("division domain: |F| = {0:e} at the working point")]
    DivisionDomain(f64),

    #[error("eigen/svd solver failed: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
