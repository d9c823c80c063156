//! Small dense linear algebra: row-major matrices, symmetric eigenvalues and
//! spectral norms.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

/// Dimension at or below which spectral norms use a full eigenvalue
/// decomposition; larger matrices fall back to power iteration.
pub const EIGEN_DIRECT_MAX_DIM: usize = 64;
pub const POWER_ITER_TOL: f64 = 1e-10;
pub const POWER_ITER_MAX: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> DenseMatrix<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    /// Returns `None` when rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)]);
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    /// Copy of the sub-block with the given row and column ranges.
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for i in rows.clone() {
            data.extend_from_slice(&self.row(i)[cols.clone()]);
        }
        Self { rows: rows.len(), cols: cols.len(), data }
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// `(A + Aᵀ) / 2`. Exactly symmetric afterwards.
    pub fn symmetrized(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let half = T::of(0.5);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v = *v * s);
    }

    /// `A x` with ascending summation within each row.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| crate::blockvec::dot(self.row(i), x)).collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        crate::blockvec::norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &DenseMatrix<T>) -> Vec<T> {
    assert_eq!(a.rows(), a.cols(), "eigenvalues need a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    let two = T::of(2.0);
    let scale = m.frobenius_norm();
    if scale == T::zero() {
        return vec![T::zero(); n];
    }
    let tol = T::epsilon() * scale;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (two * apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    eig
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration from the all-ones vector.
fn power_iteration_psd<T: Scalar>(a: &DenseMatrix<T>) -> T {
    let n = a.rows();
    let mut v = vec![T::one() / T::of_usize(n).sqrt(); n];
    let mut lambda = T::zero();
    let tol = T::of(POWER_ITER_TOL);
    for _ in 0..POWER_ITER_MAX {
        let w = a.mul_vec(&v);
        let nw = crate::blockvec::norm(&w);
        if nw == T::zero() {
            return T::zero();
        }
        let next = crate::blockvec::dot(&v, &w);
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Spectral norm (largest singular value) of an arbitrary matrix.
pub fn spectral_norm<T: Scalar>(a: &DenseMatrix<T>) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    if a.rows() == a.cols() && a.is_symmetric() && a.rows() <= EIGEN_DIRECT_MAX_DIM {
        let eig = symmetric_eigenvalues(a);
        return eig[0].abs().max(eig[eig.len() - 1].abs());
    }
    // Gram matrix on the smaller side.
    let gram = if a.rows() <= a.cols() { a.mul(&a.transpose()) } else { a.transpose().mul(a) };
    let gram = gram.symmetrized();
    let top = if gram.rows() <= EIGEN_DIRECT_MAX_DIM {
        *symmetric_eigenvalues(&gram).last().expect("nonempty")
    } else {
        power_iteration_psd(&gram)
    };
    top.max(T::zero()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pseudo_random(n: usize, m: usize, seed: u64) -> DenseMatrix<f64> {
        // xorshift, enough for test matrices
        let mut s = seed | 1;
        let data = (0..n * m)
            .map(|_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                (s % 20_000) as f64 / 10_000.0 - 1.0
            })
            .collect();
        DenseMatrix::from_row_major(n, m, data)
    }

    #[test]
    fn two_by_two_closed_form() {
        let q = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let eig = symmetric_eigenvalues(&q);
        assert_relative_eq!(eig[0], (5.0 - 5f64.sqrt()) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(eig[1], (5.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(spectral_norm(&q), (5.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn diagonal_and_zero() {
        assert_eq!(spectral_norm(&DenseMatrix::diag(&[4.0, -9.0])), 9.0);
        assert_eq!(spectral_norm(&DenseMatrix::<f64>::zeros(2, 2)), 0.0);
        assert_eq!(spectral_norm(&DenseMatrix::<f64>::zeros(0, 3)), 0.0);
    }

    #[test]
    fn eigenvalues_match_nalgebra() {
        for seed in 1..6 {
            let a = pseudo_random(12, 12, seed).symmetrized();
            let ours = symmetric_eigenvalues(&a);
            let na = nalgebra::DMatrix::from_row_slice(12, 12, a.as_slice());
            let mut theirs: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn rectangular_norm_matches_svd() {
        for (r, c) in [(3, 5), (7, 2), (4, 4)] {
            let a = pseudo_random(r, c, 99 + r as u64);
            let na = nalgebra::DMatrix::from_row_slice(r, c, a.as_slice());
            let sv = na.singular_values().max();
            assert_relative_eq!(spectral_norm(&a), sv, max_relative = 1e-12);
        }
    }

    #[test]
    fn power_iteration_branch_agrees() {
        let a = pseudo_random(80, 80, 7).symmetrized();
        let na = nalgebra::DMatrix::from_row_slice(80, 80, a.as_slice());
        let expected = na.symmetric_eigenvalues().amax();
        assert_relative_eq!(spectral_norm(&a), expected, max_relative = 1e-8);
    }

    #[test]
    fn f32_eigenvalues() {
        let q = DenseMatrix::from_rows(&[vec![2.0f32, 1.0], vec![1.0, 3.0]]).unwrap();
        assert!((spectral_norm(&q) - 3.618034).abs() < 1e-5);
    }
}
