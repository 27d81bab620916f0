use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AetError>;

#[derive(Debug, Error)]
pub enum AetError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error in {section} at line {line}: {message}")]
    Parse {
        section: String,
        line: usize,
        message: String,
    },

    #[error("point ({x}, {y}) is not inside the mesh")]
    PointNotFound { x: f64, y: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("field belongs to mesh {found:016x}, expected {expected:016x}")]
    MeshMismatch { expected: u64, found: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("conjugate gradient diverged after {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("dataset {index}: {source}")]
    Dataset {
        index: usize,
        #[source]
        source: Box<AetError>,
    },

    #[error("outer iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<AetError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AetError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(section: &str, line: usize, message: impl Into<String>) -> Self {
        AetError::Parse {
            section: section.to_string(),
            line,
            message: message.into(),
        }
    }
}
