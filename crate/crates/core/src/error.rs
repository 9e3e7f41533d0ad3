use thiserror::Error;

use crate::geometry::Point2;

/// Errors raised by the solvers and evaluators in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("points {0} and {1} coincide")]
    CoincidentPoints(Point2, Point2),

    #[error("point {0} lies outside the domain")]
    OutsideDomain(Point2),

    #[error("finite-difference step {step:e} is below the evaluator resolution {resolution:e}")]
    StepUnderflow { step: f64, resolution: f64 },

    #[error("configuration violates clearance: {0}")]
    Collision(String),

    #[error("Newton iteration diverged after {iterations} steps (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("linear solver breakdown: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("Liouville ansatz seed failed: {0}")]
    AnsatzFailure(String),

    #[error("bubble supports overlap: {0}")]
    Overlap(String),

    #[error("vertex budget {budget} exceeded (mesh already has {vertices} vertices)")]
    BudgetExceeded { budget: usize, vertices: usize },

    #[error("eigensolver did not converge: {0}")]
    EigenBreakdown(String),

    #[error("requested {requested} eigenpairs but only {available} unknowns")]
    TooManyEigenpairs { requested: usize, available: usize },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("branch does not match: {0}")]
    MismatchedBranch(String),

    #[error("diagonal scaling has a zero entry at index {0}")]
    ZeroDiagonal(usize),

    #[error("geometry violation: {0}")]
    Geometry(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
