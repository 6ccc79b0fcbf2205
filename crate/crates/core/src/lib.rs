//! Smooth ε-insensitive support vector regression.
//!
//! The squared ε-insensitive loss is replaced by a softplus-based smooth
//! surrogate, giving a strongly convex, twice differentiable objective that is
//! minimized without constraints by a Newton-Armijo iteration. Linear and
//! Gaussian-kernel models are supported, along with the usual regression
//! statistics, target-stratified splitting, cross-validation and grid search.

pub mod data;
mod error;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod select;
pub mod smoothing;
pub mod solver;
pub mod synth;

pub use data::{ColumnRef, CsvOptions, Dataset, FoldPlan, ScalingStats, SplitPlan};
pub use error::{Error, ModelFormatError};
pub use kernel::KernelSpec;
pub use linalg::{DenseMatrix, DenseVector};
pub use metrics::MetricsReport;
pub use model::{fit, fit_traced, predict, TrainedModel};
pub use objective::{Hyperparams, ModelParams, Problem};
pub use select::{cross_validate, evaluate_report, grid_search, CvScheme, GridResult, GridSpec, KernelKind};
pub use smoothing::SmoothingParams;
pub use solver::{minimize, SolverConfig, SolverReport, Termination};
