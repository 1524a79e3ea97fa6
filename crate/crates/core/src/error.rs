use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown vertex {vertex} (graph has {n} vertices)")]
    UnknownVertex { vertex: usize, n: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("family definition error in `{family}`: {detail}")]
    FamilyDefinition { family: String, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("end is not a boundary point: {0}")]
    NotBoundaryPoint(String),

    #[error("boundary neighborhoods have infinite measure: {0}")]
    InfiniteMeasure(String),

    #[error(
        "solver did not converge after {iterations} iterations (relative residual {residual:e})"
    )]
    Numerical { iterations: usize, residual: f64 },

    #[error("unknown family `{name}`; valid names: {valid}")]
    Registry { name: String, valid: String },

    #[error("unsupported family `{name}`: {reason}")]
    Unsupported { name: String, reason: String },

    #[error("inconsistent verdicts: {0}")]
    Inconsistent(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors the caller can fix by changing the input or the environment
    /// (files, directories), as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical { .. } | Error::Inconsistent(_))
    }
}
