//! Newton-Armijo minimization of the smooth ε-SVR objective.
//!
//! Each iteration solves `∇²Φ d = -∇Φ` by Cholesky and backtracks along `d`
//! with step sizes `1, ½, ¼, …` until the sufficient-decrease condition
//! `Φ(x) - Φ(x + λd) ≥ -δ λ ∇Φ(x)ᵀd` holds.

use thiserror::Error;

use crate::linalg::{dot, spd_solve, DenseVector, LinalgError};
use crate::objective::{ModelParams, Problem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),
    #[error("iteration {iteration}: {source}")]
    Linalg {
        iteration: usize,
        #[source]
        source: LinalgError,
    },
    #[error("iteration {iteration}: no step in 1, 1/2, ..., 2^-{max_halvings} gives sufficient decrease")]
    LineSearchFailed { iteration: usize, max_halvings: u32 },
    #[error("iteration {iteration}: Newton direction is not a descent direction (slope {slope})")]
    NotDescent { iteration: usize, slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    delta: f64,
    grad_tol: f64,
    max_iters: usize,
    max_halvings: u32,
    keep_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            grad_tol: 1e-6,
            max_iters: 200,
            max_halvings: 30,
            keep_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn new(delta: f64, grad_tol: f64, max_iters: usize, max_halvings: u32) -> Result<Self, SolverError> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(SolverError::Config("delta must lie in (0, 1/2)"));
        }
        if !(grad_tol.is_finite() && grad_tol > 0.0) {
            return Err(SolverError::Config("grad_tol must be positive"));
        }
        if max_iters < 1 {
            return Err(SolverError::Config("max_iters must be at least 1"));
        }
        if max_halvings < 1 {
            return Err(SolverError::Config("max_halvings must be at least 1"));
        }
        Ok(Self {
            delta,
            grad_tol,
            max_iters,
            max_halvings,
            keep_iterates: false,
        })
    }

    pub fn with_grad_tol(self, grad_tol: f64) -> Result<Self, SolverError> {
        Self::new(self.delta, grad_tol, self.max_iters, self.max_halvings).map(|c| c.keep_iterates(self.keep_iterates))
    }

    pub fn with_max_iters(self, max_iters: usize) -> Result<Self, SolverError> {
        Self::new(self.delta, self.grad_tol, max_iters, self.max_halvings).map(|c| c.keep_iterates(self.keep_iterates))
    }

    /// Records every iterate in [`SolverReport::iterates`].
    pub fn keep_iterates(mut self, keep: bool) -> Self {
        self.keep_iterates = keep;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn grad_tol(&self) -> f64 {
        self.grad_tol
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters
    }

    pub fn max_halvings(&self) -> u32 {
        self.max_halvings
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradToleranceMet,
    MaxItersReached,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GradToleranceMet => "grad_tolerance_met",
            Self::MaxItersReached => "max_iters_reached",
        }
    }
}

/// Iterate trace of one [`minimize`] call.
///
/// `objective_trace[0]` and `grad_norm_trace[0]` belong to the initial point;
/// entry `k + 1` belongs to the iterate produced by step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub termination: Termination,
    /// Empty unless requested through [`SolverConfig::keep_iterates`].
    pub iterates: Vec<ModelParams>,
}

impl SolverReport {
    pub fn final_grad_norm(&self) -> f64 {
        *self.grad_norm_trace.last().expect("trace holds the initial point")
    }

    /// `‖g_{k+1}‖ / ‖g_k‖²` for consecutive iterations.
    pub fn quadratic_ratios(&self) -> Vec<f64> {
        self.grad_norm_trace.windows(2).map(|w| w[1] / (w[0] * w[0])).collect()
    }
}

/// Solves `∇²Φ d = -∇Φ`.
pub fn newton_direction(p: &Problem, m: &ModelParams) -> Result<DenseVector, LinalgError> {
    let (g, h) = p.derivatives(m)?;
    direction_from(&g, &h)
}

fn direction_from(g: &[f64], h: &crate::linalg::DenseMatrix) -> Result<DenseVector, LinalgError> {
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    spd_solve(h, &neg)
}

/// Largest `λ ∈ {1, ½, …, 2^-max_halvings}` meeting the sufficient-decrease
/// condition along `d`. Returns `None` when no such step exists.
pub fn armijo_step(p: &Problem, m: &ModelParams, d: &[f64], cfg: &SolverConfig) -> Result<Option<f64>, LinalgError> {
    let g = p.objective_gradient(m)?;
    backtrack(p, m, d, dot(&g, d), cfg)
}

fn backtrack(
    p: &Problem,
    m: &ModelParams,
    d: &[f64],
    slope: f64,
    cfg: &SolverConfig,
) -> Result<Option<f64>, LinalgError> {
    let mut step = 1.0;
    for _ in 0..=cfg.max_halvings {
        let decrease = p.decrease_along(m, d, step)?;
        if decrease >= -cfg.delta * step * slope {
            return Ok(Some(step));
        }
        step *= 0.5;
    }
    Ok(None)
}

/// Runs Newton-Armijo from `init` until `‖∇Φ‖∞ ≤ grad_tol` or `max_iters`
/// steps have been taken. The returned parameters are the last iterate.
pub fn minimize(
    p: &Problem,
    init: ModelParams,
    cfg: &SolverConfig,
) -> Result<(ModelParams, SolverReport), SolverError> {
    let linalg = |iteration| move |source| SolverError::Linalg { iteration, source };

    let mut x = init;
    let mut report = SolverReport {
        iterations: 0,
        objective_trace: vec![p.objective_value(&x).map_err(linalg(0))?],
        grad_norm_trace: Vec::new(),
        step_sizes: Vec::new(),
        termination: Termination::MaxItersReached,
        iterates: Vec::new(),
    };
    if cfg.keep_iterates {
        report.iterates.push(x.clone());
    }

    loop {
        let k = report.iterations;
        let (g, h) = p.derivatives(&x).map_err(linalg(k))?;
        report.grad_norm_trace.push(g.norm_inf());
        if g.norm_inf() <= cfg.grad_tol {
            report.termination = Termination::GradToleranceMet;
            break;
        }
        if k >= cfg.max_iters {
            break;
        }

        let d = direction_from(&g, &h).map_err(linalg(k))?;
        let slope = dot(&g, &d);
        if slope.is_nan() || slope >= 0.0 {
            return Err(SolverError::NotDescent { iteration: k, slope });
        }
        let step = backtrack(p, &x, &d, slope, cfg)
            .map_err(linalg(k))?
            .ok_or(SolverError::LineSearchFailed {
                iteration: k,
                max_halvings: cfg.max_halvings,
            })?;

        x = x.step(&d, step);
        report.objective_trace.push(p.objective_value(&x).map_err(linalg(k))?);
        report.step_sizes.push(step);
        report.iterations += 1;
        if cfg.keep_iterates {
            report.iterates.push(x.clone());
        }
    }
    Ok((x, report))
}

/// Solves at each smoothing sharpness in turn, warm-starting from the previous
/// solution. Returns the minimizer and report for every level.
pub fn minimize_continuation(
    p: &Problem,
    init: ModelParams,
    alphas: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<(f64, ModelParams, SolverReport)>, SolverError> {
    let mut out = Vec::with_capacity(alphas.len());
    let mut x = init;
    for &alpha in alphas {
        let hyper = p
            .hyper()
            .with_alpha(alpha)
            .map_err(|_| SolverError::Config("continuation alpha must be positive"))?;
        let level = Problem::new(p.design().clone(), p.targets().clone(), hyper).expect("dimensions unchanged");
        let (sol, report) = minimize(&level, x, cfg)?;
        x = sol.clone();
        out.push((alpha, sol, report));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::linalg::DenseMatrix;
    use crate::objective::Hyperparams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, m: usize, n: usize, c: f64, eps: f64) -> Problem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DenseMatrix::from_row_major(m, n, a).unwrap();
        let y = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h = Hyperparams::new(c, eps, 5.0, KernelSpec::Linear).unwrap();
        Problem::new(a, y, h).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> ModelParams {
        ModelParams {
            coeffs: (0..n).map(|_| rng.gen_range(-scale..scale)).collect(),
            bias: rng.gen_range(-scale..scale),
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1e-6, 10, 10).is_err());
        assert!(SolverConfig::new(0.5, 1e-6, 10, 10).is_err());
        assert!(SolverConfig::new(0.1, 0.0, 10, 10).is_err());
        assert!(SolverConfig::new(0.1, 1e-6, 0, 10).is_err());
        assert!(SolverConfig::new(0.1, 1e-6, 10, 0).is_err());
        let d = SolverConfig::default();
        assert_eq!(
            (d.delta(), d.grad_tol(), d.max_iters(), d.max_halvings()),
            (0.05, 1e-6, 200, 30)
        );
    }

    #[test]
    fn pure_regularizer_direction_returns_to_origin() {
        let p = problem(1, 10, 3, f64::MIN_POSITIVE, 0.1);
        let m = ModelParams {
            coeffs: vec![1.0, -2.0, 0.5].into(),
            bias: 3.0,
        };
        let d = newton_direction(&p, &m).unwrap();
        assert_eq!(d.as_slice(), &[-1.0, 2.0, -0.5, -3.0]);
        let step = armijo_step(&p, &m, &d, &SolverConfig::default()).unwrap();
        assert_eq!(step, Some(1.0));
    }

    #[test]
    fn newton_direction_descends() {
        let p = problem(2, 30, 4, 50.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..100 {
            let m = random_point(&mut rng, 4, 3.0);
            let g = p.objective_gradient(&m).unwrap();
            let d = newton_direction(&p, &m).unwrap();
            assert!(dot(&g, &d) < 0.0);
            let phi = p.objective_value(&m).unwrap();
            assert!(p.objective_value(&m.step(&d, 1e-6)).unwrap() < phi);
        }
    }

    #[test]
    fn armijo_accepts_only_sufficient_decrease() {
        let p = problem(3, 30, 4, 50.0, 0.1);
        let cfg = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let m = random_point(&mut rng, 4, 3.0);
            let g = p.objective_gradient(&m).unwrap();
            let d = newton_direction(&p, &m).unwrap();
            let step = armijo_step(&p, &m, &d, &cfg).unwrap().unwrap();
            let dec = p.objective_value(&m).unwrap() - p.objective_value(&m.step(&d, step)).unwrap();
            assert!(dec >= -cfg.delta() * step * dot(&g, &d));
        }
    }

    #[test]
    fn armijo_shortens_blown_up_direction() {
        let p = problem(4, 30, 4, 50.0, 0.1);
        let cfg = SolverConfig::default();
        let m = random_point(&mut ChaCha8Rng::seed_from_u64(22), 4, 1.0);
        let g = p.objective_gradient(&m).unwrap();
        let d: Vec<f64> = newton_direction(&p, &m).unwrap().iter().map(|v| v * 1e6).collect();
        let step = armijo_step(&p, &m, &d, &cfg).unwrap().unwrap();
        assert!(step < 1.0);
        let dec = p.objective_value(&m).unwrap() - p.objective_value(&m.step(&d, step)).unwrap();
        assert!(dec >= -cfg.delta() * step * dot(&g, &d));
    }

    #[test]
    fn armijo_reports_failure_on_ascent_direction() {
        let p = problem(5, 10, 2, 1.0, 0.1);
        let m = ModelParams::zeros(2);
        let g = p.objective_gradient(&m).unwrap();
        let cfg = SolverConfig::new(0.05, 1e-6, 10, 5).unwrap();
        assert_eq!(armijo_step(&p, &m, &g, &cfg).unwrap(), None);
    }

    #[test]
    fn optimal_init_takes_no_steps() {
        let p = problem(6, 20, 3, 10.0, 0.1);
        let cfg = SolverConfig::default();
        let (sol, _) = minimize(&p, ModelParams::zeros(3), &cfg).unwrap();
        let (again, report) = minimize(&p, sol.clone(), &cfg).unwrap();
        assert_eq!(report.iterations, 0);
        assert_eq!(report.termination, Termination::GradToleranceMet);
        assert_eq!(again, sol);
    }

    #[test]
    fn exact_hyperplane_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, n) = (50, 5);
        let a = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = DenseMatrix::from_row_major(m, n, a).unwrap();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = a.row_iter().map(|r| dot(r, &w) + 0.7).collect();
        let h = Hyperparams::new(1e3, 0.1, 5.0, KernelSpec::Linear).unwrap();
        let p = Problem::new(a, y, h).unwrap();
        let (_, report) = minimize(&p, ModelParams::zeros(n), &SolverConfig::default()).unwrap();
        assert_eq!(report.termination, Termination::GradToleranceMet);
        assert!(report.iterations <= 50);
        assert!(report.objective_trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn different_inits_agree() {
        let p = problem(8, 40, 6, 100.0, 0.1);
        let cfg = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (a, _) = minimize(&p, random_point(&mut rng, 6, 5.0), &cfg).unwrap();
        let (b, _) = minimize(&p, random_point(&mut rng, 6, 5.0), &cfg).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-6);
    }

    #[test]
    fn one_step_from_perturbed_optimum() {
        let p = problem(9, 30, 3, 10.0, 0.1);
        let cfg = SolverConfig::default().with_grad_tol(1e-10).unwrap();
        let (opt, _) = minimize(&p, ModelParams::zeros(3), &cfg).unwrap();
        let near = opt.step(&[1e-5, -1e-5, 1e-5, 1e-5], 1.0);
        let loose = SolverConfig::default();
        let (_, report) = minimize(&p, near, &loose).unwrap();
        assert!(report.iterations <= 1);
        assert_eq!(report.termination, Termination::GradToleranceMet);
    }

    #[test]
    fn max_iters_is_reported() {
        let p = problem(10, 30, 3, 1e4, 0.0);
        let cfg = SolverConfig::default().with_max_iters(1).unwrap();
        let init = ModelParams {
            coeffs: vec![50.0, -50.0, 50.0].into(),
            bias: 50.0,
        };
        let (_, report) = minimize(&p, init, &cfg).unwrap();
        assert_eq!(report.termination, Termination::MaxItersReached);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.objective_trace.len(), 2);
        assert_eq!(report.grad_norm_trace.len(), 2);
    }

    #[test]
    fn continuation_warm_starts() {
        let p = problem(11, 20, 2, 10.0, 0.2);
        let cfg = SolverConfig::default().keep_iterates(true);
        let levels = minimize_continuation(&p, ModelParams::zeros(2), &[5.0, 50.0, 500.0], &cfg).unwrap();
        assert_eq!(levels.len(), 3);
        for (_, _, report) in &levels {
            assert_eq!(report.termination, Termination::GradToleranceMet);
            assert_eq!(report.iterates.len(), report.iterations + 1);
        }
        assert_eq!(&levels[1].2.iterates[0], &levels[0].1);
    }
}
