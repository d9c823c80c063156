//! Block-partitioned vectors.
//!
//! A [`BlockPartition`] splits `R^n` into `N` consecutive blocks of sizes
//! `n_1, ..., n_N`. Agent `i` owns block `i`. Indices are 0-based in this
//! API; only user-facing output (CSV column names, reports) is 1-based.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Config("partition needs at least one block".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Config(format!("block {i} has size zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// `n` blocks of size one.
    pub fn scalar(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of blocks (agents).
    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension.
    pub fn dim(&self) -> usize {
        self.offsets[self.sizes.len()]
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Coordinate range of block `i`.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.num_blocks() {
            Ok(())
        } else {
            Err(Error::Partition(format!(
                "block index {i} out of range for {} blocks",
                self.num_blocks()
            )))
        }
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len == self.dim() {
            Ok(())
        } else {
            Err(Error::Partition(format!(
                "vector of length {len} does not match partition dimension {}",
                self.dim()
            )))
        }
    }

    /// Block `i` of a raw slice laid out by this partition.
    pub fn block<'a, T>(&self, v: &'a [T], i: usize) -> &'a [T] {
        &v[self.range(i)]
    }

    pub fn block_mut<'a, T>(&self, v: &'a mut [T], i: usize) -> &'a mut [T] {
        &mut v[self.range(i)]
    }
}

/// Dense vector addressed block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T> {
    data: Vec<T>,
    partition: Arc<BlockPartition>,
}

impl<T: Scalar> BlockVector<T> {
    pub fn zeros(partition: Arc<BlockPartition>) -> Self {
        Self { data: vec![T::zero(); partition.dim()], partition }
    }

    pub fn from_vec(partition: Arc<BlockPartition>, data: Vec<T>) -> Result<Self> {
        partition.check_len(data.len())?;
        Ok(Self { data, partition })
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block_view(&self, i: usize) -> Result<&[T]> {
        self.partition.check_index(i)?;
        Ok(self.block(i))
    }

    pub fn block_view_mut(&mut self, i: usize) -> Result<&mut [T]> {
        self.partition.check_index(i)?;
        Ok(self.block_mut(i))
    }

    /// Unchecked (panicking) block access for hot loops.
    pub fn block(&self, i: usize) -> &[T] {
        &self.data[self.partition.range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [T] {
        let r = self.partition.range(i);
        &mut self.data[r]
    }

    /// Overwrite block `i` with `values`.
    pub fn set_block(&mut self, i: usize, values: &[T]) -> Result<()> {
        let dst = self.block_view_mut(i)?;
        if dst.len() != values.len() {
            return Err(Error::Partition(format!(
                "block {i} has {} entries, got {}",
                dst.len(),
                values.len()
            )));
        }
        dst.copy_from_slice(values);
        Ok(())
    }

    /// Euclidean norm of every block.
    pub fn block_norms(&self) -> Vec<T> {
        (0..self.partition.num_blocks()).map(|i| norm(self.block(i))).collect()
    }

    pub fn norm(&self) -> T {
        norm(&self.data)
    }
}

/// Euclidean norm with ascending summation order.
pub fn norm<T: Scalar>(v: &[T]) -> T {
    norm_sq(v).sqrt()
}

pub fn norm_sq<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `‖a - b‖`.
pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}
