use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity exceeded: {what} = {value} > {cap}")]
    Capacity { what: &'static str, value: f64, cap: f64 },
    #[error("parameters degenerate at T = {t}: {detail}")]
    DegenerateParams { t: f64, detail: String },
    #[error("precision budget exceeded: {0}")]
    Precision(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not positive definite (minors {minors:?})")]
    NotPositiveDefinite { minors: Vec<f64> },
    #[error("matrix is not symmetric (max deviation {0:e})")]
    Asymmetric(f64),
    #[error("empty prime range ({0})")]
    EmptyRange(String),
    #[error("perturbation not admissible: N^2 * gamma * maxentry = {0}")]
    Inadmissible(f64),
    #[error("quadrature under-resolved: need at least {required} nodes, got {got}")]
    UnderResolved { required: usize, got: usize },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Domain(_) | Error::EmptyDomain(_) => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
