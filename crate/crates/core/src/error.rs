use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("empty zone: polygon {0} intersects no valid cell")]
    EmptyZone(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("predictor name collision: {0}")]
    Collision(String),

    #[error("model {model} is inapplicable: predictor {predictor} is missing")]
    Inapplicable { model: String, predictor: String },

    #[error("no models for species {0}")]
    Routing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown predictor names: {}", .0.join(", "))]
    UnknownPredictors(Vec<String>),

    #[error("singular design: column {column} is collinear with [{}]", .with.join(", "))]
    Singular { column: String, with: Vec<String> },

    #[error("argument error: {0}")]
    Argument(String),

    #[error("layer stack error: {0}")]
    Stack(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
