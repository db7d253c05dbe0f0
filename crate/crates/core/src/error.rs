use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangleFace { line: usize, count: usize },

    #[error("vertex index {index} out of range (vertex count {count})")]
    IndexOutOfRange { index: i64, count: usize },

    #[error("face {face} repeats a vertex index")]
    RepeatedFaceIndex { face: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("vertex {vertex} has zero lumped mass")]
    ZeroMass { vertex: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("mesh has {n} vertices; the dense eigensolver is verification-scale only (limit {limit})")]
    TooLargeForDense { n: usize, limit: usize },

    #[error("mesh has {components} connected components; spectral analysis needs exactly one")]
    Disconnected { components: usize },

    #[error("edge ({0}, {1}) is not in the mesh")]
    UnknownEdge(usize, usize),

    #[error("{what} {index} out of range (valid: {valid})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        valid: String,
    },

    #[error("{0}")]
    Insufficient(String),

    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input
    /// files or arguments).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateFace { .. }
                | Error::ZeroMass { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::TooLargeForDense { .. }
                | Error::Disconnected { .. }
        )
    }
}
