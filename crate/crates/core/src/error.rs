use thiserror::Error;

/// Errors reported by mesh handling, geometry kernels and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-triangle face {face}: {count} vertices")]
    NonTriangleFace { face: usize, count: usize },

    #[error("non-manifold edge ({a}, {b}) shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("boundary edge ({a}, {b})")]
    BoundaryEdge { a: usize, b: usize },

    #[error("triangles {first} and {second} disagree on orientation")]
    InconsistentOrientation { first: usize, second: usize },

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("antipodal points: logarithm and transport are undefined")]
    Antipodal,

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("Armijo backtracking failed in {what} at index {index}")]
    ArmijoFailure { what: &'static str, index: usize },

    #[error("singular KKT system")]
    SingularKkt,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
