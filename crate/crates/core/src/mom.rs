//! Median-of-means estimation over a [`Partition`].
//!
//! For even `K` the median is the lower one (ascending rank `K/2`), so the
//! returned value is always attained by a concrete block.

use crate::data::Partition;
use crate::error::{check_dim, MomError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BlockMeans {
    means: Vec<f64>,
}

impl BlockMeans {
    /// Wraps precomputed block means.
    pub fn from_means(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(MomError::argument("at least one block mean is required"));
        }
        Ok(BlockMeans { means })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn k(&self) -> usize {
        self.means.len()
    }

    /// The lower median of the block means.
    pub fn median(&self) -> f64 {
        self.means[self.median_block_index()]
    }

    /// Index of a block realizing the median; ties go to the smallest index.
    pub fn median_block_index(&self) -> usize {
        median_index(&self.means)
    }
}

/// Index of the lower median of `values`, smallest index among ties.
pub(crate) fn median_index(values: &[f64]) -> usize {
    debug_assert!(!values.is_empty());
    let rank = (values.len() - 1) / 2;
    let mut scratch = values.to_vec();
    let (_, &mut target, _) = scratch.select_nth_unstable_by(rank, f64::total_cmp);
    values
        .iter()
        .position(|v| v.total_cmp(&target).is_eq())
        .expect("selected value comes from the input")
}

/// `means[k] = mean of values over block k`, summed in ascending index order.
pub fn block_means(values: &[f64], partition: &Partition) -> Result<BlockMeans> {
    check_dim(partition.n(), values.len())?;
    let m = partition.block_size() as f64;
    let means = partition
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| values[i]).sum::<f64>() / m)
        .collect();
    Ok(BlockMeans { means })
}

pub fn mom_estimate(values: &[f64], partition: &Partition) -> Result<f64> {
    Ok(block_means(values, partition)?.median())
}

pub fn median_block_index(means: &BlockMeans) -> usize {
    means.median_block_index()
}
