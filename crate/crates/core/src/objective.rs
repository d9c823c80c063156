//! Smooth objectives, block-Lipschitz constants and box constraint sets.

use std::sync::Arc;

use crate::blockvec::{dot, BlockPartition};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, DenseMatrix};
use crate::scalar::Scalar;

/// A smooth objective whose gradient can be evaluated one block at a time.
///
/// Only quadratics ship with the crate; the simulator is written against this
/// trait so other objectives can be plugged in.
pub trait SmoothObjective<T: Scalar> {
    fn partition(&self) -> &Arc<BlockPartition>;

    fn value(&self, x: &[T]) -> T;

    /// Writes `∇^{[i]} f(x)` into `out` (length `n_i`).
    fn gradient_block_into(&self, x: &[T], i: usize, out: &mut [T]);

    fn block_lipschitz(&self) -> BlockLipschitzMatrix<T>;

    fn gradient_block(&self, x: &[T], i: usize) -> Result<Vec<T>> {
        let p = self.partition();
        p.check_len(x.len())?;
        p.check_index(i)?;
        let mut out = vec![T::zero(); p.block_size(i)];
        self.gradient_block_into(x, i, &mut out);
        Ok(out)
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        let p = self.partition();
        p.check_len(x.len())?;
        let mut out = vec![T::zero(); p.dim()];
        for i in 0..p.num_blocks() {
            self.gradient_block_into(x, i, p.block_mut(&mut out, i));
        }
        Ok(out)
    }
}

/// `f(x) = ½ xᵀQx + rᵀx` with `Q` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective<T> {
    q: DenseMatrix<T>,
    r: Vec<T>,
    partition: Arc<BlockPartition>,
}

impl<T: Scalar> QuadraticObjective<T> {
    /// `q` is symmetrized as `(Q + Qᵀ)/2`.
    pub fn new(q: DenseMatrix<T>, r: Vec<T>, partition: Arc<BlockPartition>) -> Result<Self> {
        let n = partition.dim();
        if q.rows() != n || q.cols() != n {
            return Err(Error::Partition(format!(
                "Q is {}x{}, partition dimension is {n}",
                q.rows(),
                q.cols()
            )));
        }
        partition.check_len(r.len())?;
        if !q.is_finite() || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("Q and r must be finite".into()));
        }
        Ok(Self { q: q.symmetrized(), r, partition })
    }

    pub fn q(&self) -> &DenseMatrix<T> {
        &self.q
    }

    pub fn r(&self) -> &[T] {
        &self.r
    }
}

impl<T: Scalar> SmoothObjective<T> for QuadraticObjective<T> {
    fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    fn value(&self, x: &[T]) -> T {
        let half = T::of(0.5);
        let n = self.partition.dim();
        let mut acc = T::zero();
        for k in 0..n {
            acc = acc + x[k] * (half * dot(self.q.row(k), x) + self.r[k]);
        }
        acc
    }

    fn gradient_block_into(&self, x: &[T], i: usize, out: &mut [T]) {
        for (o, k) in out.iter_mut().zip(self.partition.range(i)) {
            *o = dot(self.q.row(k), x) + self.r[k];
        }
    }

    fn block_lipschitz(&self) -> BlockLipschitzMatrix<T> {
        let p = &self.partition;
        let nb = p.num_blocks();
        let mut l = DenseMatrix::zeros(nb, nb);
        for i in 0..nb {
            for j in i..nb {
                let v = spectral_norm(&self.q.submatrix(p.range(i), p.range(j)));
                l[(i, j)] = v;
                l[(j, i)] = v;
            }
        }
        BlockLipschitzMatrix { blocks: l, global: spectral_norm(&self.q) }
    }
}

/// Block-Lipschitz constants `L^i_j` together with the global constant `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLipschitzMatrix<T> {
    blocks: DenseMatrix<T>,
    global: T,
}

impl<T: Scalar> BlockLipschitzMatrix<T> {
    /// Entries must be nonnegative and the matrix symmetric.
    pub fn new(blocks: DenseMatrix<T>, global: T) -> Result<Self> {
        if blocks.rows() != blocks.cols() {
            return Err(Error::Config("block-Lipschitz matrix must be square".into()));
        }
        if blocks.as_slice().iter().any(|v| !(*v >= T::zero()) || !v.is_finite())
            || !(global >= T::zero())
        {
            return Err(Error::Config("Lipschitz constants must be finite and nonnegative".into()));
        }
        if !blocks.is_symmetric() {
            return Err(Error::Config("block-Lipschitz matrix must be symmetric".into()));
        }
        Ok(Self { blocks, global })
    }

    pub fn num_agents(&self) -> usize {
        self.blocks.rows()
    }

    /// `L^i_j`.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.blocks[(i, j)]
    }

    /// Row `i`: everything agent `i` needs to know about the objective.
    pub fn row(&self, i: usize) -> &[T] {
        self.blocks.row(i)
    }

    pub fn global(&self) -> T {
        self.global
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.blocks
    }

    /// Agents `i` and `j` must exchange messages iff `L^i_j ≠ 0`.
    pub fn coupled(&self, i: usize, j: usize) -> bool {
        self.blocks[(i, j)] != T::zero()
    }
}

/// Per-coordinate box `lower ≤ x ≤ upper`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    partition: Arc<BlockPartition>,
}

impl<T: Scalar> BoxConstraint<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, partition: Arc<BlockPartition>) -> Result<Self> {
        partition.check_len(lower.len())?;
        partition.check_len(upper.len())?;
        for (k, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == T::infinity() || hi == T::neg_infinity()
            {
                return Err(Error::Config(format!("empty box at coordinate {k}: [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper, partition })
    }

    /// `|x_k| ≤ radius` for every coordinate.
    pub fn symmetric(radius: T, partition: Arc<BlockPartition>) -> Result<Self> {
        let n = partition.dim();
        Self::new(vec![-radius; n], vec![radius; n], partition)
    }

    /// All of `R^n`.
    pub fn unbounded(partition: Arc<BlockPartition>) -> Self {
        let n = partition.dim();
        Self { lower: vec![T::neg_infinity(); n], upper: vec![T::infinity(); n], partition }
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    /// Euclidean projection of `y` onto `X_i`, in place.
    pub fn project_block_in_place(&self, i: usize, y: &mut [T]) {
        let r = self.partition.range(i);
        for ((v, &lo), &hi) in y.iter_mut().zip(&self.lower[r.clone()]).zip(&self.upper[r]) {
            *v = v.max(lo).min(hi);
        }
    }

    pub fn project_block(&self, i: usize, y: &[T]) -> Result<Vec<T>> {
        self.partition.check_index(i)?;
        if y.len() != self.partition.block_size(i) {
            return Err(Error::Partition(format!(
                "block {i} has {} entries, got {}",
                self.partition.block_size(i),
                y.len()
            )));
        }
        let mut out = y.to_vec();
        self.project_block_in_place(i, &mut out);
        Ok(out)
    }

    pub fn project(&self, y: &[T]) -> Vec<T> {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| v.max(lo).min(hi))
            .collect()
    }

    pub fn block_contains(&self, i: usize, y: &[T]) -> bool {
        let r = self.partition.range(i);
        y.iter()
            .zip(&self.lower[r.clone()])
            .zip(&self.upper[r])
            .all(|((&v, &lo), &hi)| v >= lo && v <= hi)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.lower.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn quad(q: Vec<Vec<f64>>, r: Vec<f64>) -> QuadraticObjective<f64> {
        let p = Arc::new(BlockPartition::scalar(r.len()).unwrap());
        QuadraticObjective::new(DenseMatrix::from_rows(&q).unwrap(), r, p).unwrap()
    }

    #[test]
    fn gradient_block_examples() {
        let f = quad(vec![vec![2., 1.], vec![1., 3.]], vec![0., 0.]);
        assert_eq!(f.gradient_block(&[1., 1.], 0).unwrap(), vec![3.]);
        let f = quad(vec![vec![1., 0.], vec![0., 1.]], vec![-1., -1.]);
        assert_eq!(f.gradient_block(&[1., 1.], 1).unwrap(), vec![0.]);
        let f = quad(vec![vec![2., 1.], vec![1., 3.]], vec![1., 0.]);
        assert_eq!(f.gradient_block(&[0., 0.], 0).unwrap(), vec![1.]);
    }

    #[test]
    fn gradient_block_dimension_mismatch() {
        let f = quad(vec![vec![2., 1.], vec![1., 3.]], vec![0., 0.]);
        assert!(matches!(f.gradient_block(&[1.], 0), Err(Error::Partition(_))));
        assert!(matches!(f.gradient_block(&[1., 1.], 2), Err(Error::Partition(_))));
    }

    #[test]
    fn value_matches_formula() {
        let f = quad(vec![vec![2., 1.], vec![1., 3.]], vec![1., -2.]);
        // x = (1, -1): xᵀQx = 3, rᵀx = 3
        assert_eq!(f.value(&[1., -1.]), 4.5);
    }

    #[test]
    fn symmetrizes_on_construction() {
        let f = quad(vec![vec![0., 2.], vec![0., 0.]], vec![0., 0.]);
        assert!(f.q().is_symmetric());
        assert_eq!(f.q()[(0, 1)], 1.0);
    }

    #[test]
    fn block_lipschitz_examples() {
        let l = quad(vec![vec![2., 1.], vec![1., 3.]], vec![0., 0.]).block_lipschitz();
        assert_eq!(l.matrix().to_rows(), vec![vec![2., 1.], vec![1., 3.]]);
        // eigenvalues of [[2,1],[1,3]] are (5 ± √5)/2
        assert_relative_eq!(l.global(), (5. + 5f64.sqrt()) / 2., max_relative = 1e-14);

        let l = quad(vec![vec![4., 0.], vec![0., 9.]], vec![0., 0.]).block_lipschitz();
        assert_eq!(l.matrix().to_rows(), vec![vec![4., 0.], vec![0., 9.]]);
        assert_eq!(l.global(), 9.);

        let l = quad(vec![vec![0., 0.], vec![0., 0.]], vec![0., 0.]).block_lipschitz();
        assert!(l.matrix().as_slice().iter().all(|&v| v == 0.));
        assert_eq!(l.global(), 0.);
        assert!(!l.coupled(0, 1));
    }

    #[test]
    fn multi_dimensional_blocks() {
        let p = Arc::new(BlockPartition::new(vec![2, 1]).unwrap());
        let q = DenseMatrix::from_rows(&[
            vec![3., 0., 1.],
            vec![0., -4., 2.],
            vec![1., 2., 5.],
        ])
        .unwrap();
        let f = QuadraticObjective::new(q, vec![0.; 3], p).unwrap();
        let l = f.block_lipschitz();
        assert_eq!(l.get(0, 0), 4.);
        assert_relative_eq!(l.get(0, 1), 5f64.sqrt(), max_relative = 1e-14);
        assert_eq!(l.get(1, 0), l.get(0, 1));
        assert_eq!(l.get(1, 1), 5.);
    }

    #[test]
    fn projection_examples() {
        let p = Arc::new(BlockPartition::new(vec![1, 2]).unwrap());
        let c = BoxConstraint::symmetric(10_000.0, p.clone()).unwrap();
        assert_eq!(c.project_block(0, &[12_000.]).unwrap(), vec![10_000.]);
        assert_eq!(c.project_block(1, &[3., -4.]).unwrap(), vec![3., -4.]);
        let c = BoxConstraint::symmetric(1.0, p).unwrap();
        assert_eq!(c.project_block(1, &[-3., 0.5]).unwrap(), vec![-1., 0.5]);
    }

    #[test]
    fn empty_box_rejected() {
        let p = Arc::new(BlockPartition::scalar(1).unwrap());
        assert!(BoxConstraint::new(vec![1.0], vec![0.0], p.clone()).is_err());
        assert!(BoxConstraint::new(vec![f64::INFINITY], vec![f64::INFINITY], p.clone()).is_err());
        let c = BoxConstraint::new(vec![1.0], vec![f64::INFINITY], p).unwrap();
        assert_eq!(c.project(&[1e300]), vec![1e300]);
        assert_eq!(c.project(&[-5.0]), vec![1.0]);
    }

    proptest! {
        #[test]
        fn projection_idempotent_nonexpansive(
            y in prop::collection::vec(-5.0f64..5.0, 3),
            z in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let p = Arc::new(BlockPartition::new(vec![1, 2]).unwrap());
            let c = BoxConstraint::new(vec![-1.0, -2.0, f64::NEG_INFINITY], vec![1.0, 0.5, 2.0], p).unwrap();
            let py = c.project(&y);
            let pz = c.project(&z);
            prop_assert_eq!(c.project(&py), py.clone());
            prop_assert!(c.contains(&py));
            prop_assert!(crate::blockvec::dist(&py, &pz) <= crate::blockvec::dist(&y, &z));
        }
    }
}
