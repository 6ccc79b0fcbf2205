//! Inputs shared by the benchmarks.

use ssvr_core::data::fit_scaling;
use ssvr_core::kernel::gram_matrix;
use ssvr_core::{synth, Dataset, DenseMatrix, Hyperparams, KernelSpec, Problem};

/// Standardized descriptor table with `m` rows and `n` columns.
pub fn descriptors(m: usize, n: usize) -> (Dataset, DenseMatrix) {
    let d = synth::descriptor_table(m, n, 11);
    let rows: Vec<usize> = (0..m).collect();
    let z = fit_scaling(&d, &rows)
        .expect("nonempty")
        .scale(&d.features)
        .expect("same width");
    (d, z)
}

pub fn linear_problem(m: usize, n: usize, c: f64) -> Problem {
    let (d, z) = descriptors(m, n);
    let h = Hyperparams::new(c, 0.1, 5.0, KernelSpec::Linear).expect("valid");
    Problem::new(z, d.targets, h).expect("consistent")
}

pub fn gaussian_problem(m: usize, n: usize, c: f64, gamma: f64) -> Problem {
    let (d, z) = descriptors(m, n);
    let spec = KernelSpec::gaussian(gamma).expect("valid");
    let h = Hyperparams::new(c, 0.1, 5.0, spec).expect("valid");
    Problem::new(gram_matrix(&z, spec), d.targets, h).expect("consistent")
}
