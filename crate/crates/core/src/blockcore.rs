//! Block-partitioned primal vectors and block-constant diagonal weights.
//!
//! A primal point `x` is stored densely and split into `m` contiguous
//! blocks `x_1, ..., x_m` of sizes `n_1, ..., n_m`. Diagonal weight
//! matrices used by the step-size rules are constant within each block, so
//! [`DiagWeights`] holds one scalar per block.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{ensure_len, Error, Result};

/// Sizes and offsets of the `m` primal blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidParameter(
                "a partition needs at least one block".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for (i, &s) in sizes.iter().enumerate() {
            if s == 0 {
                return Err(Error::InvalidParameter(format!("block {i} has size 0")));
            }
            offsets.push(offsets[i] + s);
        }
        Ok(Self { offsets })
    }

    /// Splits `n` coordinates into `m` contiguous blocks whose sizes differ
    /// by at most one (the larger blocks come first).
    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!(
                "cannot split {n} coordinates into {m} blocks"
            )));
        }
        let (base, extra) = (n / m, n % m);
        let sizes: Vec<usize> = (0..m).map(|i| base + usize::from(i < extra)).collect();
        Self::new(&sizes)
    }

    pub fn single(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.offsets.len() - 1]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn size(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Coordinate range of block `i`.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn checked_range(&self, i: usize) -> Result<Range<usize>> {
        if i < self.num_blocks() {
            Ok(self.range(i))
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.num_blocks(),
            })
        }
    }
}

/// Dense primal vector tagged with its block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    data: Vec<f64>,
    partition: Arc<BlockPartition>,
}

impl BlockVector {
    pub fn zeros(partition: Arc<BlockPartition>) -> Self {
        Self {
            data: vec![0.0; partition.dim()],
            partition,
        }
    }

    pub fn from_vec(partition: Arc<BlockPartition>, data: Vec<f64>) -> Result<Self> {
        ensure_len(partition.dim(), data.len())?;
        if let Some(j) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "entry {j} of block vector is not finite"
            )));
        }
        Ok(Self { data, partition })
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Read view of block `i` (`U_i^T x`).
    pub fn block(&self, i: usize) -> Result<&[f64]> {
        let r = self.partition.checked_range(i)?;
        Ok(&self.data[r])
    }

    /// Mutable view of block `i`; writes touch no other block.
    pub fn block_mut(&mut self, i: usize) -> Result<&mut [f64]> {
        let r = self.partition.checked_range(i)?;
        Ok(&mut self.data[r])
    }

    pub fn set_block(&mut self, i: usize, values: &[f64]) -> Result<()> {
        let dst = self.block_mut(i)?;
        ensure_len(dst.len(), values.len())?;
        dst.copy_from_slice(values);
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// One nonnegative weight per block: `diag(d_1 I_{n_1}, ..., d_m I_{n_m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagWeights(Vec<f64>);

impl DiagWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diagonal weight {j} = {} must be finite and nonnegative",
                values[j]
            )));
        }
        Ok(Self(values))
    }

    pub fn constant(m: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Blockwise sum `D_1 + c D_2`.
    pub fn add_scaled(&self, other: &DiagWeights, c: f64) -> Result<Self> {
        ensure_len(self.len(), other.len())?;
        Self::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }
}

/// `||x||_D^2 = sum_i d_i ||x_i||^2`.
pub fn weighted_norm_sq(x: &BlockVector, d: &DiagWeights) -> Result<f64> {
    ensure_len(x.num_blocks(), d.len())?;
    Ok(weighted_norm_sq_slice(x.partition(), x.as_slice(), d.as_slice()))
}

/// Slice form of [`weighted_norm_sq`] for callers holding raw storage.
pub(crate) fn weighted_norm_sq_slice(part: &BlockPartition, x: &[f64], d: &[f64]) -> f64 {
    (0..part.num_blocks())
        .map(|i| {
            let b: f64 = x[part.range(i)].iter().map(|v| v * v).sum();
            d[i] * b
        })
        .sum()
}

/// Squared weighted distance `||u - v||_D^2` without materializing `u - v`.
pub(crate) fn weighted_dist_sq(part: &BlockPartition, u: &[f64], v: &[f64], d: &[f64]) -> f64 {
    (0..part.num_blocks())
        .map(|i| {
            let r = part.range(i);
            let b: f64 = u[r.clone()]
                .iter()
                .zip(&v[r])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i] * b
        })
        .sum()
}
