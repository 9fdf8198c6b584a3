use std::path::PathBuf;

use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("outside theorem range: {0}")]
    OutsideRange(String),

    #[error("degenerate bump")]
    DegenerateBump,

    #[error("derivative order {requested} exceeds maximum {max}")]
    OrderExceeded { requested: usize, max: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wraparound detected: boundary strip holds {fraction:.3e} of the kernel mass (limit {limit:.1e})")]
    Wraparound { fraction: f64, limit: f64 },

    #[error("exact bilinear path needs {needed} pair operations, budget is {budget}; use the shell-product path")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("quadrature resolution too low: {nodes} nodes, need at least {floor}")]
    Resolution { nodes: usize, floor: usize },

    #[error("fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
