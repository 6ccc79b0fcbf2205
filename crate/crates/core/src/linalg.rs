//! Dense vectors and row-major matrices with a Cholesky solver for the
//! symmetric positive definite Newton systems.

use std::ops::{Deref, DerefMut, Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entries length {len} does not match shape {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite: pivot {pivot} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
}

/// Column vector of reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting bad shapes and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(LinalgError::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero, and a zero-column matrix still has rows
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `M · v`.
pub fn matvec(m: &DenseMatrix, v: &[f64]) -> Result<DenseVector, LinalgError> {
    if m.cols != v.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.cols,
            found: v.len(),
        });
    }
    Ok(m.row_iter().map(|row| dot(row, v)).collect())
}

/// Lower-triangular Cholesky factor `L` with `H = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    /// Pivots at or below this fraction of the largest diagonal entry are
    /// treated as failure.
    pub const PIVOT_TOLERANCE: f64 = 1e-12;

    pub fn factor(h: &DenseMatrix) -> Result<Self, LinalgError> {
        let n = h.rows;
        if h.cols != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: h.cols,
            });
        }
        check_symmetric(h)?;
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max(h[(i, i)]));
        let floor = Self::PIVOT_TOLERANCE * max_diag;

        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let lj = &l.data[j * n..j * n + j];
            let d = h[(j, j)] - dot(lj, lj);
            if d.is_nan() || d <= floor {
                return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let s = h[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    /// Squared diagonal of `L`, i.e. the pivots of the factorization.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.l.rows).map(|i| self.l[(i, i)].powi(2)).collect()
    }

    pub fn factor_matrix(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn solve(&self, g: &[f64]) -> Result<DenseVector, LinalgError> {
        let n = self.l.rows;
        if g.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: g.len(),
            });
        }
        let l = &self.l;
        // L z = g
        let mut z = g.to_vec();
        for i in 0..n {
            let s = z[i] - dot(&l.data[i * n..i * n + i], &z[..i]);
            z[i] = s / l[(i, i)];
        }
        // Lᵀ d = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[(k, i)] * z[k];
            }
            z[i] = s / l[(i, i)];
        }
        Ok(DenseVector(z))
    }
}

fn check_symmetric(h: &DenseMatrix) -> Result<(), LinalgError> {
    let n = h.rows;
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (h[(i, j)], h[(j, i)]);
            if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                return Err(LinalgError::NotSymmetric { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Solves `H d = g` for symmetric positive definite `H`.
pub fn spd_solve(h: &DenseMatrix, g: &[f64]) -> Result<DenseVector, LinalgError> {
    Cholesky::factor(h)?.solve(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_row_major(rows, cols, data).unwrap()
    }

    // MᵀM + I
    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
        let m = random_matrix(rng, n + 3, n);
        let mut h = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] += (0..m.rows()).map(|k| m[(k, i)] * m[(k, j)]).sum::<f64>();
            }
        }
        h
    }

    #[test]
    fn matvec_examples() {
        let v = [1.0, 2.0, 3.0];
        assert_eq!(matvec(&DenseMatrix::identity(3), &v).unwrap().as_slice(), &v);
        assert_eq!(matvec(&DenseMatrix::zeros(2, 3), &v).unwrap().as_slice(), &[0.0, 0.0]);
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matvec(&m, &[1.0, 1.0]).unwrap().as_slice(), &[3.0, 7.0]);
        assert!(matches!(
            matvec(&m, &v),
            Err(LinalgError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DenseMatrix::from_row_major(2, 2, vec![1.0; 3]),
            Err(LinalgError::BadShape { .. })
        ));
        assert!(matches!(
            DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, f64::NAN, 0.0]),
            Err(LinalgError::NonFinite { row: 1, col: 0 })
        ));
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn spd_solve_examples() {
        let d = spd_solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.as_slice(), &[1.0, 2.0, 3.0]);
        let h = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let d = spd_solve(&h, &[2.0, 4.0]).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn spd_solve_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 17, 40] {
            let h = random_spd(&mut rng, n);
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let d = spd_solve(&h, &g).unwrap();
            let hd = matvec(&h, &d).unwrap();
            let g_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let res = hd.iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(res <= 1e-8 * (1.0 + g_inf), "n={n} res={res}");
        }
    }

    #[test]
    fn spd_solve_rejects_indefinite_and_asymmetric() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            spd_solve(&h, &[1.0, 1.0]),
            Err(LinalgError::NotPositiveDefinite { index: 1, .. })
        ));
        let h = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            spd_solve(&h, &[1.0, 1.0]),
            Err(LinalgError::NotSymmetric { .. })
        ));
        let h = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-14]]).unwrap();
        assert!(matches!(
            spd_solve(&h, &[1.0, 1.0]),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn factor_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_spd(&mut rng, 6);
        let chol = Cholesky::factor(&h).unwrap();
        let l = chol.factor_matrix();
        let mut llt = DenseMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                llt[(i, j)] = (0..6).map(|k| l[(i, k)] * l[(j, k)]).sum();
            }
        }
        assert!(llt.max_abs_diff(&h) < 1e-12);
        assert!(chol.pivots().iter().all(|&p| p > 0.0));
    }

    proptest! {
        #[test]
        fn matvec_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, 4, 5);
            let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = matvec(&m, &combo).unwrap();
            let mu = matvec(&m, &u).unwrap();
            let mv = matvec(&m, &v).unwrap();
            for i in 0..4 {
                let rhs = a * mu[i] + b * mv[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn spd_solve_succeeds_on_shifted_gram(seed in 0u64..1000, n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_spd(&mut rng, n);
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let d = spd_solve(&h, &g).unwrap();
            let hd = matvec(&h, &d).unwrap();
            let g_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                prop_assert!((hd[i] - g[i]).abs() <= 1e-8 * (1.0 + g_inf));
            }
        }
    }
}
