//! Plus function, ε-insensitive loss and their smooth surrogates.
//!
//! The smooth plus function is `p(x, α) = x + log(1 + e^{-αx}) / α`, which is
//! evaluated here as `x₊ + softplus(-α|x|) / α` so that neither tail overflows
//! and `p(x, α) ≥ x₊` holds exactly in floating point. The
//! squared ε-insensitive loss `|x|_ε²` is replaced by
//! `p(x - ε, α)² + p(-x - ε, α)²`, which is even, strictly convex and smooth.

use std::f64::consts::LN_2;

/// Smoothing sharpness `alpha` and tube half-width `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    alpha: f64,
    epsilon: f64,
}

impl SmoothingParams {
    pub const DEFAULT_ALPHA: f64 = 5.0;

    /// Returns `None` unless `alpha > 0` and `epsilon >= 0` (both finite).
    pub fn new(alpha: f64, epsilon: f64) -> Option<Self> {
        (alpha.is_finite() && alpha > 0.0 && epsilon.is_finite() && epsilon >= 0.0).then_some(Self { alpha, epsilon })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `max(0, x)`.
#[inline]
pub fn plus(x: f64) -> f64 {
    x.max(0.0)
}

/// `log(1 + e^z)` without overflow for large `z` or loss of precision for very
/// negative `z`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^{-z})`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `softplus(z + v) - softplus(z)` computed without cancellation.
///
/// Uses `log1p(σ(z)·expm1(v))`, which is exact algebraically and keeps full
/// relative precision when `v` is tiny.
#[inline]
pub(crate) fn softplus_increment(z: f64, v: f64) -> f64 {
    if v.abs() > 30.0 {
        return softplus(z + v) - softplus(z);
    }
    (sigmoid(z) * v.exp_m1()).ln_1p()
}

/// Smooth plus function `p(x, α)`.
#[inline]
pub fn p_smooth(x: f64, alpha: f64) -> f64 {
    plus(x) + (-alpha * x.abs()).exp().ln_1p() / alpha
}

/// `|x|_ε = max(0, |x| - ε)`.
#[inline]
pub fn eps_loss(x: f64, epsilon: f64) -> f64 {
    plus(x - epsilon) + plus(-x - epsilon)
}

/// `|x|_ε²` as the sum of two squared plus terms; at most one is nonzero.
#[inline]
pub fn eps_loss_sq(x: f64, epsilon: f64) -> f64 {
    let hi = plus(x - epsilon);
    let lo = plus(-x - epsilon);
    hi * hi + lo * lo
}

/// Smooth surrogate `p_ε²(x, α)` of the squared ε-insensitive loss.
#[inline]
pub fn p_eps_sq(x: f64, params: SmoothingParams) -> f64 {
    let SmoothingParams { alpha, epsilon } = params;
    let hi = p_smooth(x - epsilon, alpha);
    let lo = p_smooth(-x - epsilon, alpha);
    hi * hi + lo * lo
}

/// First derivative of [`p_eps_sq`] in `x`.
#[inline]
pub fn p_eps_sq_grad(x: f64, params: SmoothingParams) -> f64 {
    let SmoothingParams { alpha, epsilon } = params;
    let a = x - epsilon;
    let c = -x - epsilon;
    // d/dz p(z, α)² = 2 p(z, α) σ(αz)
    2.0 * (p_smooth(a, alpha) * sigmoid(alpha * a) - p_smooth(c, alpha) * sigmoid(alpha * c))
}

/// Second derivative of [`p_eps_sq`] in `x`.
#[inline]
pub fn p_eps_sq_hess(x: f64, params: SmoothingParams) -> f64 {
    let SmoothingParams { alpha, epsilon } = params;
    squared_p_curvature(x - epsilon, alpha) + squared_p_curvature(-x - epsilon, alpha)
}

// d²/dz² p(z, α)² = 2 (σ(αz)² + α p(z, α) σ(αz) σ(-αz))
#[inline]
fn squared_p_curvature(z: f64, alpha: f64) -> f64 {
    let s = sigmoid(alpha * z);
    2.0 * (s * s + alpha * p_smooth(z, alpha) * s * sigmoid(-alpha * z))
}

/// `p_ε²(x + h) - p_ε²(x)` computed term by term so that tiny increments keep
/// their relative precision.
pub(crate) fn p_eps_sq_increment(x: f64, h: f64, params: SmoothingParams) -> f64 {
    let SmoothingParams { alpha, epsilon } = params;
    squared_p_increment(x - epsilon, h, alpha) + squared_p_increment(-x - epsilon, -h, alpha)
}

// p(z + h)² - p(z)² = (p(z + h) - p(z)) (p(z + h) + p(z))
#[inline]
fn squared_p_increment(z: f64, h: f64, alpha: f64) -> f64 {
    let dp = softplus_increment(alpha * z, alpha * h) / alpha;
    dp * (p_smooth(z + h, alpha) + p_smooth(z, alpha))
}

/// Upper bound on `p_ε²(x, α) - |x|_ε²` valid whenever `|x| < σ + ε`:
/// `2 (log 2 / α)² + (2σ / α) log 2`.
pub fn smoothing_gap_bound(sigma: f64, alpha: f64) -> f64 {
    let t = LN_2 / alpha;
    2.0 * t * t + 2.0 * sigma / alpha * LN_2
}
