//! Training a model end to end, predicting with it, and its plain-text file
//! format.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{apply_scaling, fit_scaling, Dataset, ScalingStats};
use crate::error::{Error, ModelFormatError};
use crate::kernel::{gram_matrix, kernel_rows, KernelSpec};
use crate::linalg::{matvec, DenseMatrix, DenseVector};
use crate::objective::{Hyperparams, ModelParams, Problem};
use crate::solver::{minimize, SolverConfig, SolverReport, Termination};

/// What remains of the solver run once a model is packaged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSummary {
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub termination: Termination,
}

/// A fitted regressor with everything needed to predict on raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub hyper: Hyperparams,
    pub params: ModelParams,
    pub scaling: ScalingStats,
    /// Standardized training rows for the Gaussian kernel; `0 × n` for Linear.
    pub anchors: DenseMatrix,
    pub feature_names: Option<Vec<String>>,
    pub summary: FitSummary,
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.scaling.n_features()
    }

    pub fn converged(&self) -> bool {
        self.summary.termination == Termination::GradToleranceMet
    }
}

/// Standardizes on all rows of `d`, builds the linear or kernel problem and
/// minimizes it from the origin.
pub fn fit(d: &Dataset, h: &Hyperparams, cfg: &SolverConfig) -> Result<TrainedModel, Error> {
    fit_traced(d, h, cfg).map(|(model, _)| model)
}

/// [`fit`], also returning the full solver report.
pub fn fit_traced(d: &Dataset, h: &Hyperparams, cfg: &SolverConfig) -> Result<(TrainedModel, SolverReport), Error> {
    if d.is_empty() {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    let rows: Vec<usize> = (0..d.len()).collect();
    let scaling = fit_scaling(d, &rows)?;
    let scaled = apply_scaling(d, &scaling)?;
    let (design, anchors) = match h.kernel() {
        KernelSpec::Linear => (scaled.features, DenseMatrix::zeros(0, d.n_features())),
        spec @ KernelSpec::Gaussian { .. } => (gram_matrix(&scaled.features, spec), scaled.features),
    };
    let problem = Problem::new(design, scaled.targets, *h)?;
    let init = ModelParams::zeros(problem.design().cols());
    let (params, report) = minimize(&problem, init, cfg)?;
    let model = TrainedModel {
        hyper: *h,
        params,
        scaling,
        anchors,
        feature_names: d.feature_names.clone(),
        summary: FitSummary {
            iterations: report.iterations,
            final_grad_norm: report.final_grad_norm(),
            termination: report.termination,
        },
    };
    Ok((model, report))
}

/// Predictions for raw (unscaled) query rows.
pub fn predict(model: &TrainedModel, queries: &DenseMatrix) -> Result<DenseVector, Error> {
    let z = model.scaling.scale(queries)?;
    let raw = match model.hyper.kernel() {
        KernelSpec::Linear => matvec(&z, &model.params.coeffs)?,
        spec @ KernelSpec::Gaussian { .. } => {
            let k = kernel_rows(&z, &model.anchors, spec)?;
            matvec(&k, &model.params.coeffs)?
        }
    };
    Ok(raw.iter().map(|v| v + model.params.bias).collect())
}

const FORMAT_VERSION: u32 = 1;

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_list(out: &mut String, key: &str, values: &[f64]) {
    let _ = write!(out, "{key} {}", values.len());
    for v in values {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

/// Serializes to the line-oriented `key value…` text format.
pub fn to_text(model: &TrainedModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ssvr-model");
    let _ = writeln!(out, "format-version {FORMAT_VERSION}");
    let _ = writeln!(out, "kernel {}", model.hyper.kernel().name());
    if let Some(gamma) = model.hyper.kernel().gamma() {
        let _ = writeln!(out, "gamma {}", fmt_f64(gamma));
    }
    let _ = writeln!(out, "c {}", fmt_f64(model.hyper.c()));
    let _ = writeln!(out, "epsilon {}", fmt_f64(model.hyper.epsilon()));
    let _ = writeln!(out, "alpha {}", fmt_f64(model.hyper.alpha()));
    let _ = writeln!(out, "bias {}", fmt_f64(model.params.bias));
    push_list(&mut out, "coeffs", &model.params.coeffs);
    push_list(&mut out, "means", &model.scaling.means);
    push_list(&mut out, "stddevs", &model.scaling.stddevs);
    let consts: Vec<String> = model.scaling.constant_columns.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "constant-columns {} {}", consts.len(), consts.join(" "));
    let _ = write!(out, "anchors {} {}", model.anchors.rows(), model.anchors.cols());
    for v in model.anchors.as_slice() {
        out.push(' ');
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
    if let Some(names) = &model.feature_names {
        let _ = writeln!(out, "feature-names {}", names.join("\t"));
    }
    let _ = writeln!(out, "iterations {}", model.summary.iterations);
    let _ = writeln!(out, "final-grad-norm {}", fmt_f64(model.summary.final_grad_norm));
    let _ = writeln!(out, "termination {}", model.summary.termination.as_str());
    out
}

struct Fields<'a> {
    lines: Vec<(usize, &'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> Result<(usize, &'a str), ModelFormatError> {
        self.lines
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|&(line, _, v)| (line, v))
            .ok_or_else(|| ModelFormatError::MissingKey(key.to_string()))
    }

    fn opt(&self, key: &str) -> Option<(usize, &'a str)> {
        self.get(key).ok()
    }

    fn num(&self, key: &str) -> Result<f64, ModelFormatError> {
        let (line, v) = self.get(key)?;
        parse_num(line, v)
    }

    fn count(&self, key: &str) -> Result<usize, ModelFormatError> {
        let (line, v) = self.get(key)?;
        v.trim().parse().map_err(|_| ModelFormatError::Malformed {
            line,
            reason: format!("bad count {v:?}"),
        })
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ModelFormatError> {
        let (line, v) = self.get(key)?;
        let mut tokens = v.split_whitespace();
        let n: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| ModelFormatError::Malformed {
                line,
                reason: "missing length".into(),
            })?;
        let values = tokens.map(|t| parse_num(line, t)).collect::<Result<Vec<_>, _>>()?;
        if values.len() != n {
            return Err(ModelFormatError::Malformed {
                line,
                reason: format!("{key} declares {n} values, found {}", values.len()),
            });
        }
        Ok(values)
    }
}

fn parse_num(line: usize, v: &str) -> Result<f64, ModelFormatError> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ModelFormatError::Malformed {
            line,
            reason: format!("bad number {v:?}"),
        })
}

/// Parses the text produced by [`to_text`].
pub fn from_text(text: &str) -> Result<TrainedModel, ModelFormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l.trim() == "ssvr-model" => {}
        _ => return Err(ModelFormatError::NotAModel),
    }
    let fields = Fields {
        lines: lines
            .map(|(i, l)| {
                let (k, v) = l.split_once(' ').unwrap_or((l, ""));
                (i + 1, k, v)
            })
            .collect(),
    };
    let version = fields.count("format-version")?;
    if version != FORMAT_VERSION as usize {
        return Err(ModelFormatError::UnsupportedVersion(version));
    }
    let kernel = match fields.get("kernel")?.1.trim() {
        "linear" => KernelSpec::Linear,
        "gaussian" => KernelSpec::Gaussian {
            gamma: fields.num("gamma")?,
        },
        other => {
            return Err(ModelFormatError::Malformed {
                line: fields.get("kernel")?.0,
                reason: format!("unknown kernel {other:?}"),
            })
        }
    };
    let hyper =
        Hyperparams::new(fields.num("c")?, fields.num("epsilon")?, fields.num("alpha")?, kernel).map_err(|e| {
            ModelFormatError::Malformed {
                line: 0,
                reason: e.to_string(),
            }
        })?;
    let params = ModelParams {
        coeffs: fields.list("coeffs")?.into(),
        bias: fields.num("bias")?,
    };
    let means = fields.list("means")?;
    let stddevs = fields.list("stddevs")?;
    let (cline, cval) = fields.get("constant-columns")?;
    let mut ctoks = cval.split_whitespace();
    let n_const: usize = ctoks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| ModelFormatError::Malformed {
            line: cline,
            reason: "missing length".into(),
        })?;
    let constant_columns = ctoks
        .map(|t| {
            t.parse::<usize>().map_err(|_| ModelFormatError::Malformed {
                line: cline,
                reason: format!("bad index {t:?}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if constant_columns.len() != n_const || means.len() != stddevs.len() {
        return Err(ModelFormatError::Malformed {
            line: cline,
            reason: "inconsistent scaling block".into(),
        });
    }

    let (aline, aval) = fields.get("anchors")?;
    let mut atoks = aval.split_whitespace();
    let mut dim = || -> Result<usize, ModelFormatError> {
        atoks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| ModelFormatError::Malformed {
                line: aline,
                reason: "missing anchor shape".into(),
            })
    };
    let (rows, cols) = (dim()?, dim()?);
    let data = aval
        .split_whitespace()
        .skip(2)
        .map(|t| parse_num(aline, t))
        .collect::<Result<Vec<_>, _>>()?;
    let anchors = DenseMatrix::from_row_major(rows, cols, data).map_err(|e| ModelFormatError::Malformed {
        line: aline,
        reason: e.to_string(),
    })?;

    let expected_coeffs = match kernel {
        KernelSpec::Linear => means.len(),
        KernelSpec::Gaussian { .. } => anchors.rows(),
    };
    if params.coeffs.len() != expected_coeffs || cols != means.len() {
        return Err(ModelFormatError::Malformed {
            line: aline,
            reason: "coefficients do not match the feature/anchor shape".into(),
        });
    }

    let termination = match fields.get("termination")?.1.trim() {
        "grad_tolerance_met" => Termination::GradToleranceMet,
        "max_iters_reached" => Termination::MaxItersReached,
        other => {
            return Err(ModelFormatError::Malformed {
                line: fields.get("termination")?.0,
                reason: format!("unknown termination {other:?}"),
            })
        }
    };
    Ok(TrainedModel {
        hyper,
        params,
        scaling: ScalingStats {
            means,
            stddevs,
            constant_columns,
        },
        anchors,
        feature_names: fields
            .opt("feature-names")
            .map(|(_, v)| v.split('\t').map(str::to_string).collect()),
        summary: FitSummary {
            iterations: fields.count("iterations")?,
            final_grad_norm: fields.num("final-grad-norm")?,
            termination,
        },
    })
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<(), Error> {
    std::fs::write(path, to_text(model)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path) -> Result<TrainedModel, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(from_text(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricsReport;
    use crate::synth;

    fn linear_hyper() -> Hyperparams {
        Hyperparams::new(1e3, 0.1, 5.0, KernelSpec::Linear).unwrap()
    }

    #[test]
    fn noiseless_linear_fit() {
        let d = synth::linear(100, 10, 0.0, 1);
        let model = fit(&d, &linear_hyper(), &SolverConfig::default()).unwrap();
        assert!(model.converged());
        let pred = predict(&model, &d.features).unwrap();
        let r = MetricsReport::compute(&d.targets, &pred).unwrap();
        assert!(r.r2 >= 0.999, "{}", r.r2);
    }

    #[test]
    fn linear_prediction_at_training_mean_is_bias() {
        let d = synth::linear(40, 3, 0.1, 2);
        let model = fit(&d, &linear_hyper(), &SolverConfig::default()).unwrap();
        let q = DenseMatrix::from_rows(std::slice::from_ref(&model.scaling.means)).unwrap();
        assert_eq!(predict(&model, &q).unwrap()[0], model.params.bias);
    }

    #[test]
    fn gaussian_prediction_on_training_row_is_finite() {
        let d = synth::sinc(30, 0.05, 3);
        let h = Hyperparams::new(100.0, 0.1, 5.0, KernelSpec::Gaussian { gamma: 0.5 }).unwrap();
        let model = fit(&d, &h, &SolverConfig::default()).unwrap();
        assert_eq!(model.anchors.rows(), model.params.coeffs.len());
        let p = predict(&model, &d.features.select_rows(&[4])).unwrap();
        assert!(p[0].is_finite());
        assert!(predict(&model, &DenseMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let d = synth::sinc(25, 0.05, 4);
        let h = Hyperparams::new(100.0, 0.1, 5.0, KernelSpec::Gaussian { gamma: 0.5 }).unwrap();
        let model = fit(&d, &h, &SolverConfig::default()).unwrap();
        let back = from_text(&to_text(&model)).unwrap();
        assert_eq!(back, model);

        let lin = fit(&synth::linear(30, 4, 0.1, 5), &linear_hyper(), &SolverConfig::default()).unwrap();
        assert_eq!(from_text(&to_text(&lin)).unwrap(), lin);
    }

    #[test]
    fn malformed_text_is_rejected() {
        assert!(matches!(from_text("hello"), Err(ModelFormatError::NotAModel)));
        let lin = fit(&synth::linear(20, 2, 0.1, 6), &linear_hyper(), &SolverConfig::default()).unwrap();
        let text = to_text(&lin);
        let v2 = text.replace("format-version 1", "format-version 2");
        assert!(matches!(from_text(&v2), Err(ModelFormatError::UnsupportedVersion(2))));
        let no_bias: String = text
            .lines()
            .filter(|l| !l.starts_with("bias"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(from_text(&no_bias), Err(ModelFormatError::MissingKey(_))));
        let truncated = text.replace("coeffs 2 ", "coeffs 3 ");
        assert!(matches!(from_text(&truncated), Err(ModelFormatError::Malformed { .. })));
    }
}
