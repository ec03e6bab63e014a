use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("boundary quadrature under-resolved for eps = {eps}: {detail}")]
    QuadratureUnderresolved { eps: f64, detail: String },

    #[error("assembly failed on cell {cell}: {detail}")]
    AssemblyFailure { cell: usize, detail: String },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("rate fit refused: {0}")]
    FitRefused(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
