use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected length {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("boundary constraints are rank deficient (rank {rank} of {rows})")]
    RankDeficient { rank: usize, rows: usize },

    #[error("geometry map is singular at {point:?} (det J = {det:e})")]
    SingularGeometry { point: Vec<f64>, det: f64 },

    #[error("non-positive Jacobian determinant in element {element:?}")]
    InvertedElement { element: Vec<usize> },

    #[error("preconditioner is not positive definite (<r, Pr> = {value:e} at iteration {iteration})")]
    IndefinitePreconditioner { iteration: usize, value: f64 },

    #[error("constrained space is empty at level {level} for degree {degree}")]
    EmptySpace { level: u32, degree: usize },

    #[error("malformed geometry file {path}: {message}")]
    GeometryFile { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
