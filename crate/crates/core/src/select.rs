//! Cross-validation, hyperparameter grid search and report files.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{make_folds, Dataset, FoldPlan};
use crate::error::Error;
use crate::kernel::KernelSpec;
use crate::metrics::{rmse, EvalPair, MetricsReport};
use crate::model::{fit, predict, TrainedModel};
use crate::objective::Hyperparams;
use crate::solver::SolverConfig;

/// Mean and per-fold held-out RMSE.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub mean_rmse: f64,
    pub per_fold: Vec<f64>,
}

/// Fits on the complement of each fold (scaling refit every time) and scores
/// the held-out rows. A fold whose solve stops at `max_iters` is an error.
pub fn cross_validate(d: &Dataset, h: &Hyperparams, folds: &FoldPlan, cfg: &SolverConfig) -> Result<CvOutcome, Error> {
    if folds.fold_assignments.len() != d.len() {
        return Err(Error::InvalidInput(format!(
            "fold plan covers {} rows, dataset has {}",
            folds.fold_assignments.len(),
            d.len()
        )));
    }
    let per_fold = (0..folds.k)
        .map(|f| {
            score_fold(d, h, folds, f, cfg).map_err(|e| Error::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvOutcome {
        mean_rmse: per_fold.iter().sum::<f64>() / per_fold.len() as f64,
        per_fold,
    })
}

fn score_fold(d: &Dataset, h: &Hyperparams, folds: &FoldPlan, f: usize, cfg: &SolverConfig) -> Result<f64, Error> {
    let (train, held) = folds.fold(f);
    if held.is_empty() || train.is_empty() {
        return Err(Error::InvalidInput("empty fold".into()));
    }
    let model = fit(&d.select(&train), h, cfg)?;
    if !model.converged() {
        return Err(Error::NotConverged {
            iterations: model.summary.iterations,
        });
    }
    let test = d.select(&held);
    let pred = predict(&model, &test.features)?;
    Ok(rmse(EvalPair::new(&test.targets, &pred)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvScheme {
    KFold(usize),
    LeaveOneOut,
}

impl CvScheme {
    pub fn folds(&self, d: &Dataset, seed: u64) -> Result<FoldPlan, Error> {
        let k = match *self {
            Self::KFold(k) => k,
            Self::LeaveOneOut => d.len(),
        };
        Ok(make_folds(d, k, seed)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Gaussian,
}

/// Hyperparameter lists to sweep. `gamma_values` is ignored for Linear.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub epsilon_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub alpha: f64,
    pub kernel: KernelKind,
    pub cv: CvScheme,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c_values: vec![1e3, 8350.0, 1e6, 1e7],
            epsilon_values: vec![0.1],
            gamma_values: (1..=9).map(|i| i as f64 / 100.0).collect(),
            alpha: 5.0,
            kernel: KernelKind::Gaussian,
            cv: CvScheme::KFold(10),
            seed: 0,
        }
    }
}

impl GridSpec {
    fn combinations(&self) -> Result<Vec<Hyperparams>, Error> {
        if self.c_values.is_empty() || self.epsilon_values.is_empty() {
            return Err(Error::InvalidInput("C and epsilon lists must be nonempty".into()));
        }
        let gammas: Vec<Option<f64>> = match self.kernel {
            KernelKind::Linear => vec![None],
            KernelKind::Gaussian if self.gamma_values.is_empty() => {
                return Err(Error::InvalidInput("gamma list must be nonempty".into()))
            }
            KernelKind::Gaussian => self.gamma_values.iter().map(|&g| Some(g)).collect(),
        };
        let mut out = Vec::new();
        for &c in &self.c_values {
            for &eps in &self.epsilon_values {
                for gamma in &gammas {
                    let kernel = match gamma {
                        None => KernelSpec::Linear,
                        Some(g) => KernelSpec::Gaussian { gamma: *g },
                    };
                    out.push(Hyperparams::new(c, eps, self.alpha, kernel)?);
                }
            }
        }
        Ok(out)
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub hyper: Hyperparams,
    /// Failure message for cells whose cross-validation errored.
    pub outcome: Result<CvOutcome, String>,
}

impl GridCell {
    pub fn c(&self) -> f64 {
        self.hyper.c()
    }

    pub fn epsilon(&self) -> f64 {
        self.hyper.epsilon()
    }

    pub fn gamma(&self) -> Option<f64> {
        self.hyper.kernel().gamma()
    }

    pub fn mean_rmse(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.mean_rmse)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Cells in `C`-major, then ε, then γ order of the spec lists.
    pub cells: Vec<GridCell>,
    best: usize,
}

/// Hyperparameter axis for curve extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    C,
    Epsilon,
    Gamma,
}

impl Axis {
    fn value(&self, cell: &GridCell) -> Option<f64> {
        match self {
            Self::C => Some(cell.c()),
            Self::Epsilon => Some(cell.epsilon()),
            Self::Gamma => cell.gamma(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::C => "c",
            Self::Epsilon => "epsilon",
            Self::Gamma => "gamma",
        }
    }
}

// lower RMSE, then smaller C, then smaller γ, then smaller ε
fn rank(a: &GridCell, b: &GridCell) -> Ordering {
    let (ra, rb) = (
        a.mean_rmse().unwrap_or(f64::INFINITY),
        b.mean_rmse().unwrap_or(f64::INFINITY),
    );
    ra.total_cmp(&rb)
        .then(a.c().total_cmp(&b.c()))
        .then(a.gamma().unwrap_or(0.0).total_cmp(&b.gamma().unwrap_or(0.0)))
        .then(a.epsilon().total_cmp(&b.epsilon()))
}

impl GridResult {
    pub fn best(&self) -> &GridCell {
        &self.cells[self.best]
    }

    /// Mean RMSE along one axis with the other two held at the best cell's
    /// values. Failed cells are left out.
    pub fn curve(&self, axis: Axis) -> Vec<(f64, f64)> {
        let best = self.best();
        let others_match = |c: &GridCell| {
            [Axis::C, Axis::Epsilon, Axis::Gamma]
                .into_iter()
                .filter(|&a| a != axis)
                .all(|a| a.value(c) == a.value(best))
        };
        let mut pts: Vec<(f64, f64)> = self
            .cells
            .iter()
            .filter(|c| others_match(c))
            .filter_map(|c| Some((axis.value(c)?, c.mean_rmse()?)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    /// `grid.csv` content: one row per cell with its per-fold RMSE.
    pub fn to_csv(&self) -> String {
        let k = self
            .cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().ok().map(|o| o.per_fold.len()))
            .max()
            .unwrap_or(0);
        let mut out = String::from("c,epsilon,gamma,mean_rmse,status");
        for f in 0..k {
            let _ = write!(out, ",fold_{f}");
        }
        out.push('\n');
        for cell in &self.cells {
            let gamma = cell.gamma().map(|g| g.to_string()).unwrap_or_default();
            let _ = write!(out, "{},{},{}", cell.c(), cell.epsilon(), gamma);
            match &cell.outcome {
                Ok(o) => {
                    let _ = write!(out, ",{},ok", o.mean_rmse);
                    for v in &o.per_fold {
                        let _ = write!(out, ",{v}");
                    }
                }
                Err(msg) => {
                    let _ = write!(out, ",,\"failed: {}\"", msg.replace('"', "'"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Writes `grid.csv`, `best.csv` and one `curve_<axis>.csv` per swept
    /// axis into `dir`. Returns the written paths.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>, Error> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut files = vec![(dir.join("grid.csv"), self.to_csv())];
        let best = self.best();
        files.push((
            dir.join("best.csv"),
            format!(
                "c,epsilon,gamma,mean_rmse\n{},{},{},{}\n",
                best.c(),
                best.epsilon(),
                best.gamma().map(|g| g.to_string()).unwrap_or_default(),
                best.mean_rmse().expect("best cell succeeded")
            ),
        ));
        for axis in [Axis::C, Axis::Epsilon, Axis::Gamma] {
            if axis == Axis::Gamma && best.gamma().is_none() {
                continue;
            }
            let mut body = format!("{},mean_rmse\n", axis.name());
            for (x, y) in self.curve(axis) {
                let _ = writeln!(body, "{x},{y}");
            }
            files.push((dir.join(format!("curve_{}.csv", axis.name())), body));
        }
        for (path, body) in &files {
            std::fs::write(path, body).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

/// Cross-validates every combination in `g` (in parallel) and picks the cell
/// with the lowest mean RMSE. Failing cells are recorded, not fatal.
pub fn grid_search(d: &Dataset, g: &GridSpec, cfg: &SolverConfig) -> Result<GridResult, Error> {
    let folds = g.cv.folds(d, g.seed)?;
    let cells: Vec<GridCell> = g
        .combinations()?
        .into_par_iter()
        .map(|hyper| GridCell {
            hyper,
            outcome: cross_validate(d, &hyper, &folds, cfg).map_err(|e| e.to_string()),
        })
        .collect();
    let best = (0..cells.len())
        .filter(|&i| cells[i].outcome.is_ok())
        .min_by(|&a, &b| rank(&cells[a], &cells[b]))
        .ok_or(Error::AllCellsFailed)?;
    Ok(GridResult { cells, best })
}

/// Train and test statistics for one model, plus the raw predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub train: MetricsReport,
    pub test: MetricsReport,
    pub train_predictions: Vec<f64>,
    pub test_predictions: Vec<f64>,
    pub train_observed: Vec<f64>,
    pub test_observed: Vec<f64>,
}

pub fn evaluate_report(model: &TrainedModel, train: &Dataset, test: &Dataset) -> Result<EvalReport, Error> {
    let train_pred = predict(model, &train.features)?.into_inner();
    let test_pred = predict(model, &test.features)?.into_inner();
    Ok(EvalReport {
        train: MetricsReport::compute(&train.targets, &train_pred)?,
        test: MetricsReport::compute(&test.targets, &test_pred)?,
        train_predictions: train_pred,
        test_predictions: test_pred,
        train_observed: train.targets.to_vec(),
        test_observed: test.targets.to_vec(),
    })
}

pub const TABLE_HEADER: &str = "Algorithm,\"(epsilon, C, gamma)\",Train Error(R^2),Test Error(R^2),MAE,SRE,SEP,REP(%)";

impl EvalReport {
    /// Metric table row; MAE, SRE, SEP and REP are test-split statistics.
    pub fn table_row(&self, hyper: &Hyperparams) -> String {
        let gamma = hyper.kernel().gamma().map(|g| format!(", {g}")).unwrap_or_default();
        format!(
            "e-SSVR,\"({}, {}{})\",{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            hyper.epsilon(),
            hyper.c(),
            gamma,
            self.train.r2,
            self.test.r2,
            self.test.mae,
            self.test.sre,
            self.test.sep,
            self.test.rep_percent
        )
    }

    pub fn table_csv(&self, hyper: &Hyperparams) -> String {
        format!("{TABLE_HEADER}\n{}\n", self.table_row(hyper))
    }

    /// `split,observed,predicted` rows for both splits.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("split,observed,predicted\n");
        for (split, obs, pred) in [
            ("train", &self.train_observed, &self.train_predictions),
            ("test", &self.test_observed, &self.test_predictions),
        ] {
            for (o, p) in obs.iter().zip(pred.iter()) {
                let _ = writeln!(out, "{split},{o},{p}");
            }
        }
        out
    }
}
