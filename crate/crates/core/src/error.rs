use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::linalg::LinalgError;
use crate::metrics::MetricsError;
use crate::objective::HyperparamError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("not a model file (missing `ssvr-model` header)")]
    NotAModel,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(usize),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Hyperparam(#[from] HyperparamError),
    #[error("model file: {0}")]
    ModelFormat(#[from] ModelFormatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solver stopped after {iterations} iterations without meeting the gradient tolerance")]
    NotConverged { iterations: usize },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("every grid cell failed")]
    AllCellsFailed,
    #[error("{0}")]
    InvalidInput(String),
}
