use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("field has {found} values, grid has {expected} nodes")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("negative value {value} at node {node}")]
    Negative { node: usize, value: f64 },

    #[error("invalid charge distribution: {0}")]
    InvalidCharge(String),

    #[error("field is not neutral: integral {integral:e} exceeds tolerance {tolerance:e}")]
    NotNeutral { integral: f64, tolerance: f64 },

    #[error("closed-form cell integral needs square cells (hx = {hx}, hy = {hy})")]
    NonSquareCells { hx: f64, hy: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("could not bracket the Fermi level after {0} expansions")]
    BracketNotFound(usize),

    #[error("infeasible occupation: {0}")]
    Infeasible(String),

    #[error("symmetric eigensolver did not converge ({0} x {0} matrix)")]
    Eigensolver(usize),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
