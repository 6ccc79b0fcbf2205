//! Regression quality statistics over observed/predicted pairs.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("observed and predicted lengths differ ({observed} vs {predicted})")]
    LengthMismatch { observed: usize, predicted: usize },
    #[error("evaluation set is empty")]
    Empty,
    #[error("observed values have zero 2-norm")]
    ZeroObservedNorm,
    #[error("observed values have zero variance")]
    ZeroVariance,
    #[error("observed values have zero mean")]
    ZeroMeanObserved,
}

/// Observed targets `y` with predictions `ŷ` of the same length.
#[derive(Debug, Clone, Copy)]
pub struct EvalPair<'a> {
    observed: &'a [f64],
    predicted: &'a [f64],
}

impl<'a> EvalPair<'a> {
    pub fn new(observed: &'a [f64], predicted: &'a [f64]) -> Result<Self, MetricsError> {
        if observed.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch {
                observed: observed.len(),
                predicted: predicted.len(),
            });
        }
        if observed.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(Self { observed, predicted })
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    fn errors(&self) -> impl Iterator<Item = f64> + 'a {
        self.predicted.iter().zip(self.observed).map(|(p, o)| p - o)
    }

    fn sum_sq_err(&self) -> f64 {
        self.errors().map(|e| e * e).sum()
    }

    fn mean_observed(&self) -> f64 {
        self.observed.iter().sum::<f64>() / self.len() as f64
    }
}

/// `‖y - ŷ‖₂ / ‖y‖₂`.
pub fn sre(e: EvalPair<'_>) -> Result<f64, MetricsError> {
    let norm_y = e.observed.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_y == 0.0 {
        return Err(MetricsError::ZeroObservedNorm);
    }
    Ok(e.sum_sq_err().sqrt() / norm_y)
}

/// Mean absolute error.
pub fn mae(e: EvalPair<'_>) -> f64 {
    e.errors().map(f64::abs).sum::<f64>() / e.len() as f64
}

/// Coefficient of determination with the mean taken over `e` itself.
pub fn r2(e: EvalPair<'_>) -> Result<f64, MetricsError> {
    let mean = e.mean_observed();
    let ss_tot: f64 = e.observed.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(1.0 - e.sum_sq_err() / ss_tot)
}

/// Standard error of prediction.
pub fn sep(e: EvalPair<'_>) -> f64 {
    (e.sum_sq_err() / e.len() as f64).sqrt()
}

/// Root mean square error. Same formula as [`sep`].
pub fn rmse(e: EvalPair<'_>) -> f64 {
    (e.sum_sq_err() / e.len() as f64).sqrt()
}

/// SEP, REP% and RMSE together.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionError {
    pub sep: f64,
    /// `Err(ZeroMeanObserved)` when the observed mean is zero.
    pub rep_percent: Result<f64, MetricsError>,
    pub rmse: f64,
}

pub fn sep_rep_rmse(e: EvalPair<'_>) -> PredictionError {
    let sep = sep(e);
    let rmse = rmse(e);
    let mean = e.mean_observed();
    let rep_percent = if mean == 0.0 {
        Err(MetricsError::ZeroMeanObserved)
    } else {
        Ok(100.0 / mean * rmse)
    };
    PredictionError { sep, rep_percent, rmse }
}

/// Every statistic for one prediction set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub r2: f64,
    pub mae: f64,
    pub sre: f64,
    pub sep: f64,
    pub rep_percent: f64,
    pub rmse: f64,
}

impl MetricsReport {
    pub fn compute(observed: &[f64], predicted: &[f64]) -> Result<Self, MetricsError> {
        let e = EvalPair::new(observed, predicted)?;
        let pe = sep_rep_rmse(e);
        debug_assert_eq!(pe.sep, pe.rmse);
        Ok(Self {
            r2: r2(e)?,
            mae: mae(e),
            sre: sre(e)?,
            sep: pe.sep,
            rep_percent: pe.rep_percent?,
            rmse: pe.rmse,
        })
    }
}
