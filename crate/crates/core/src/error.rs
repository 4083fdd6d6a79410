use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh subdivision count must be at least 1, got {0}")]
    InvalidSubdivision(usize),

    #[error("triangle {triangle} is degenerate or clockwise (signed area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("edge {0} is not a boundary edge")]
    NotBoundaryEdge(usize),

    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(String),

    #[error("unsupported quadrature degree {0} (supported: 2, 4, 6, 8)")]
    UnsupportedQuadrature(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular local system on triangle {0}")]
    SingularLocalSystem(usize),

    #[error(
        "solver did not reach tolerance {tolerance:e} after {iterations} iterations \
         (relative residual {residual:e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("saddle-point constraint block is rank deficient")]
    RankDeficient,

    #[error("conformity violated on edge {edge}: one-sided values differ by {discrepancy:e}")]
    ConformityViolation { edge: usize, discrepancy: f64 },

    #[error("{0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
