//! Kernel evaluation: Gram matrices and kernel rows for query points.

use rayon::prelude::*;

use crate::linalg::{dot, DenseMatrix, LinalgError};

/// Which kernel a model uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `k(u, v) = uᵀv`. Models with this kernel train on the design matrix
    /// directly and never build a Gram matrix.
    Linear,
    /// `k(u, v) = exp(-γ ‖u - v‖²)`.
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Option<Self> {
        (gamma.is_finite() && gamma > 0.0).then_some(Self::Gaussian { gamma })
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Self::Linear => None,
            Self::Gaussian { gamma } => Some(gamma),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Gaussian { .. } => "gaussian",
        }
    }

    #[inline]
    fn eval(&self, u: &[f64], u_sq: f64, v: &[f64], v_sq: f64) -> f64 {
        let uv = dot(u, v);
        match *self {
            Self::Linear => uv,
            Self::Gaussian { gamma } => {
                let d2 = (u_sq + v_sq - 2.0 * uv).max(0.0);
                (-gamma * d2).exp()
            }
        }
    }
}

fn row_sq_norms(a: &DenseMatrix) -> Vec<f64> {
    a.row_iter().map(|r| dot(r, r)).collect()
}

/// `m × m` matrix of `k(A_i, A_j)`. Each pair is evaluated once and mirrored.
pub fn gram_matrix(a: &DenseMatrix, spec: KernelSpec) -> DenseMatrix {
    let m = a.rows();
    let norms = row_sq_norms(a);
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let ri = a.row(i);
            (i..m).map(|j| spec.eval(ri, norms[i], a.row(j), norms[j])).collect()
        })
        .collect();
    let mut g = DenseMatrix::zeros(m, m);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `|B| × m` matrix of `k(B_i, A_j)`.
pub fn kernel_rows(b: &DenseMatrix, a: &DenseMatrix, spec: KernelSpec) -> Result<DenseMatrix, LinalgError> {
    if b.cols() != a.cols() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.cols(),
            found: b.cols(),
        });
    }
    let a_norms = row_sq_norms(a);
    let data: Vec<f64> = (0..b.rows())
        .into_par_iter()
        .flat_map_iter(|i| {
            let bi = b.row(i);
            let bn = dot(bi, bi);
            let a_norms = &a_norms;
            (0..a.rows()).map(move |j| spec.eval(bi, bn, a.row(j), a_norms[j]))
        })
        .collect();
    DenseMatrix::from_row_major(b.rows(), a.rows(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64, rows: usize, cols: usize) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        DenseMatrix::from_row_major(rows, cols, data).unwrap()
    }

    fn rbf(gamma: f64) -> KernelSpec {
        KernelSpec::gaussian(gamma).unwrap()
    }

    #[test]
    fn gamma_validation() {
        assert!(KernelSpec::gaussian(0.0).is_none());
        assert!(KernelSpec::gaussian(-1.0).is_none());
        assert_eq!(KernelSpec::gaussian(0.5).unwrap().gamma(), Some(0.5));
        assert_eq!(KernelSpec::Linear.gamma(), None);
    }

    #[test]
    fn unit_diagonal_and_range() {
        let a = random(1, 12, 4);
        let g = gram_matrix(&a, rbf(0.3));
        for i in 0..12 {
            assert_eq!(g[(i, i)], 1.0);
            for j in 0..12 {
                assert!(g[(i, j)] > 0.0 && g[(i, j)] <= 1.0);
                assert_eq!(g[(i, j)], g[(j, i)]);
            }
        }
    }

    #[test]
    fn off_diagonal_value() {
        // ‖A_1 - A_2‖² = 2
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let g = gram_matrix(&a, rbf(0.5));
        assert!((g[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((g[(0, 1)] - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn huge_gamma_gives_identity() {
        let a = random(2, 8, 3);
        let g = gram_matrix(&a, rbf(1e6));
        assert!(g.max_abs_diff(&DenseMatrix::identity(8)) < 1e-9);
    }

    #[test]
    fn kernel_rows_consistent_with_gram() {
        let a = random(3, 10, 5);
        for spec in [rbf(0.7), KernelSpec::Linear] {
            let g = gram_matrix(&a, spec);
            let k = kernel_rows(&a, &a, spec).unwrap();
            assert_eq!(g, k);
        }
        let q = a.select_rows(&[4]);
        let row = kernel_rows(&q, &a, rbf(0.7)).unwrap();
        assert_eq!(row[(0, 4)], 1.0);
    }

    #[test]
    fn kernel_rows_range_and_shape() {
        let a = random(4, 9, 3);
        let b = random(5, 6, 3);
        let k = kernel_rows(&b, &a, rbf(0.2)).unwrap();
        assert_eq!((k.rows(), k.cols()), (6, 9));
        assert!(k.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0));
        let bad = random(6, 2, 4);
        assert!(kernel_rows(&bad, &a, rbf(0.2)).is_err());
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        for seed in 0..20 {
            let a = random(100 + seed, 7, 2);
            let mut g = gram_matrix(&a, rbf(0.5));
            for i in 0..7 {
                g[(i, i)] += 1e-10;
            }
            let chol = Cholesky::factor(&g).unwrap();
            assert!(chol.pivots().iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn linear_gram_is_inner_products() {
        let a = random(7, 5, 3);
        let g = gram_matrix(&a, KernelSpec::Linear);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(g[(i, j)], dot(a.row(i), a.row(j)));
            }
        }
    }
}
