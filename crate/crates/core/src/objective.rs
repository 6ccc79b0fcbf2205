//! The smooth ε-SVR objective
//!
//! ```text
//! Φ(w, b) = ½ (wᵀw + b²) + (C/2) Σᵢ p_ε²(Aᵢw + b - yᵢ, α)
//! ```
//!
//! together with its gradient and Hessian. The same code serves the linear
//! model (design = A, coefficients w ∈ Rⁿ) and the kernel model (design =
//! K(A, Aᵀ), coefficients u ∈ Rᵐ). The bias is regularized, which makes Φ
//! strongly convex with Hessian ⪰ I.

use thiserror::Error;

use crate::kernel::KernelSpec;
use crate::linalg::{dot, DenseMatrix, DenseVector, LinalgError};
use crate::smoothing::{self, SmoothingParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperparamError {
    #[error("C must be positive and finite, got {0}")]
    C(f64),
    #[error("epsilon must be nonnegative and finite, got {0}")]
    Epsilon(f64),
    #[error("alpha must be positive and finite, got {0}")]
    Alpha(f64),
    #[error("gamma must be positive and finite, got {0}")]
    Gamma(f64),
}

/// Full knob set of the method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    c: f64,
    epsilon: f64,
    alpha: f64,
    kernel: KernelSpec,
}

impl Hyperparams {
    pub fn new(c: f64, epsilon: f64, alpha: f64, kernel: KernelSpec) -> Result<Self, HyperparamError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(HyperparamError::C(c));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(HyperparamError::Epsilon(epsilon));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(HyperparamError::Alpha(alpha));
        }
        if let KernelSpec::Gaussian { gamma } = kernel {
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(HyperparamError::Gamma(gamma));
            }
        }
        Ok(Self {
            c,
            epsilon,
            alpha,
            kernel,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn smoothing(&self) -> SmoothingParams {
        SmoothingParams::new(self.alpha, self.epsilon).expect("validated on construction")
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, HyperparamError> {
        Self::new(self.c, self.epsilon, alpha, self.kernel)
    }
}

/// Coefficients and bias of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub coeffs: DenseVector,
    pub bias: f64,
}

impl ModelParams {
    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: DenseVector::zeros(len),
            bias: 0.0,
        }
    }

    /// Splits a stacked `[coeffs; bias]` vector.
    pub fn from_stacked(mut v: Vec<f64>) -> Self {
        let bias = v.pop().expect("stacked vector has a bias entry");
        Self { coeffs: v.into(), bias }
    }

    pub fn to_stacked(&self) -> Vec<f64> {
        let mut v = self.coeffs.to_vec();
        v.push(self.bias);
        v
    }

    /// `self + step · d` for a stacked direction `d`.
    pub fn step(&self, d: &[f64], step: f64) -> Self {
        let n = self.coeffs.len();
        Self {
            coeffs: self.coeffs.iter().zip(d).map(|(x, di)| x + step * di).collect(),
            bias: self.bias + step * d[n],
        }
    }

    /// ∞-norm distance between two parameter sets, bias included.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .fold((self.bias - other.bias).abs(), |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Training data and hyperparameters for one minimization.
#[derive(Debug, Clone)]
pub struct Problem {
    design: DenseMatrix,
    targets: DenseVector,
    hyper: Hyperparams,
}

impl Problem {
    /// For a Gaussian model `design` must be the Gram matrix of the training
    /// rows; for a linear model it is the feature matrix.
    pub fn new(design: DenseMatrix, targets: DenseVector, hyper: Hyperparams) -> Result<Self, LinalgError> {
        if design.rows() != targets.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: design.rows(),
                found: targets.len(),
            });
        }
        Ok(Self { design, targets, hyper })
    }

    pub fn design(&self) -> &DenseMatrix {
        &self.design
    }

    pub fn targets(&self) -> &DenseVector {
        &self.targets
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// Number of free variables, bias included.
    pub fn dim(&self) -> usize {
        self.design.cols() + 1
    }

    pub fn samples(&self) -> usize {
        self.design.rows()
    }

    fn check(&self, m: &ModelParams) -> Result<(), LinalgError> {
        if m.coeffs.len() != self.design.cols() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.design.cols(),
                found: m.coeffs.len(),
            });
        }
        Ok(())
    }

    /// `rᵢ = (design · coeffs)ᵢ + bias - yᵢ`.
    pub fn residuals(&self, m: &ModelParams) -> Result<DenseVector, LinalgError> {
        self.check(m)?;
        Ok(self
            .design
            .row_iter()
            .zip(self.targets.iter())
            .map(|(row, y)| dot(row, &m.coeffs) + m.bias - y)
            .collect())
    }

    pub fn objective_value(&self, m: &ModelParams) -> Result<f64, LinalgError> {
        let r = self.residuals(m)?;
        let params = self.hyper.smoothing();
        let loss: f64 = r.iter().map(|&ri| smoothing::p_eps_sq(ri, params)).sum();
        let reg = m.coeffs.dot(&m.coeffs) + m.bias * m.bias;
        Ok(0.5 * reg + 0.5 * self.hyper.c * loss)
    }

    /// Stacked gradient `[∂Φ/∂coeffs; ∂Φ/∂bias]`.
    pub fn objective_gradient(&self, m: &ModelParams) -> Result<DenseVector, LinalgError> {
        let r = self.residuals(m)?;
        Ok(self.gradient_from_residuals(m, &r))
    }

    fn gradient_from_residuals(&self, m: &ModelParams, r: &[f64]) -> DenseVector {
        let params = self.hyper.smoothing();
        let half_c = 0.5 * self.hyper.c;
        let mut g = m.to_stacked();
        let n = self.design.cols();
        for (row, &ri) in self.design.row_iter().zip(r) {
            let w = half_c * smoothing::p_eps_sq_grad(ri, params);
            if w == 0.0 {
                continue;
            }
            for (gj, aj) in g[..n].iter_mut().zip(row) {
                *gj += w * aj;
            }
            g[n] += w;
        }
        g.into()
    }

    /// `I + (C/2) Σᵢ p_ε²''(rᵢ) zᵢzᵢᵀ` with `zᵢ = [designᵢ, 1]`.
    pub fn objective_hessian(&self, m: &ModelParams) -> Result<DenseMatrix, LinalgError> {
        let r = self.residuals(m)?;
        Ok(self.hessian_from_residuals(&r))
    }

    fn hessian_from_residuals(&self, r: &[f64]) -> DenseMatrix {
        let params = self.hyper.smoothing();
        let half_c = 0.5 * self.hyper.c;
        let n = self.design.cols();
        let dim = n + 1;
        let mut h = DenseMatrix::identity(dim);
        let mut z = vec![1.0; dim];
        for (row, &ri) in self.design.row_iter().zip(r) {
            let w = half_c * smoothing::p_eps_sq_hess(ri, params);
            if w == 0.0 {
                continue;
            }
            z[..n].copy_from_slice(row);
            for a in 0..dim {
                let wa = w * z[a];
                if wa == 0.0 {
                    continue;
                }
                let h_row = h.row_mut(a);
                for b in a..dim {
                    h_row[b] += wa * z[b];
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        h
    }

    /// Gradient and Hessian from a single residual pass.
    pub fn derivatives(&self, m: &ModelParams) -> Result<(DenseVector, DenseMatrix), LinalgError> {
        let r = self.residuals(m)?;
        Ok((self.gradient_from_residuals(m, &r), self.hessian_from_residuals(&r)))
    }

    /// `Φ(m) - Φ(m + step·d)`, evaluated as a sum of per-term increments so
    /// that decreases far below the magnitude of Φ are not lost to rounding.
    pub fn decrease_along(&self, m: &ModelParams, d: &[f64], step: f64) -> Result<f64, LinalgError> {
        let r = self.residuals(m)?;
        if d.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                found: d.len(),
            });
        }
        let n = self.design.cols();
        let params = self.hyper.smoothing();
        // ½‖x + t d‖² - ½‖x‖² = t xᵀd + ½ t² dᵀd
        let x = m.to_stacked();
        let reg_inc = step * dot(&x, d) + 0.5 * step * step * dot(d, d);
        let loss_inc: f64 = self
            .design
            .row_iter()
            .zip(r.iter())
            .map(|(row, &ri)| {
                let shift = step * (dot(row, &d[..n]) + d[n]);
                smoothing::p_eps_sq_increment(ri, shift, params)
            })
            .sum();
        Ok(-(reg_inc + 0.5 * self.hyper.c * loss_inc))
    }

    /// The nonsmooth objective `½(wᵀw + b²) + (C/2) Σ |rᵢ|_ε²` that Φ
    /// approximates.
    pub fn nonsmooth_objective_value(&self, m: &ModelParams) -> Result<f64, LinalgError> {
        let r = self.residuals(m)?;
        let eps = self.hyper.epsilon;
        let loss: f64 = r.iter().map(|&ri| smoothing::eps_loss_sq(ri, eps)).sum();
        Ok(0.5 * (m.coeffs.dot(&m.coeffs) + m.bias * m.bias) + 0.5 * self.hyper.c * loss)
    }
}
