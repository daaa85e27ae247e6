use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("undeclared identifier `{name}` at position {pos}")]
    Undeclared { name: String, pos: usize },

    #[error("empty expression")]
    EmptyInput,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no matrix assigned to variable `{0}`")]
    MissingAssignment(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is singular to working precision (pivot {pivot:e} at column {col})")]
    Singular { pivot: f64, col: usize },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigenvalue iteration did not converge after {0} steps")]
    EigenNoConvergence(usize),

    #[error("argument is not in the upper half-plane (margin {0:e})")]
    NotInUpperHalfPlane(f64),

    #[error("adaptive quadrature exceeded {0} panels")]
    Quadrature(usize),

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("fixed point not reached after {iterations} iterations (residual {residual:e})")]
    FixedPointNoConvergence { iterations: usize, residual: f64 },

    #[error("fixed-point iterate left the upper half-plane at step {0}")]
    LeftHalfPlane(usize),

    #[error("polynomial is not selfadjoint")]
    NotSelfadjoint,

    #[error("polynomial has no terms")]
    EmptyPolynomial,

    #[error("no law given for variable `{0}`")]
    MissingLaw(String),

    #[error("invalid pencil: {0}")]
    InvalidPencil(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("evaluation failed at {location}: {source}")]
    AtNode {
        location: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, location: impl Into<String>) -> Error {
        Error::AtNode {
            location: location.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
