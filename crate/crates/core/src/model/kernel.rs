use std::cell::Cell;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::data::{Partition, TrainView};
use crate::error::{check_dim, MomError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `<x1, x2>`.
    Linear,
    /// `exp(-gamma * |x1 - x2|^2)`.
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => Err(
                MomError::argument(format!("RBF gamma must be positive, got {gamma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        check_dim(x1.len(), x2.len())?;
        Ok(self.eval_unchecked(x1, x2))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => x1.iter().zip(x2).map(|(a, b)| a * b).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    spec.eval(x1, x2)
}

/// RBF bandwidth `1 / median |x_i - x_j|^2` over the distinct pairs of an
/// evenly strided subset of at most `max_points` samples.
pub fn median_heuristic_gamma(view: TrainView<'_>, max_points: usize) -> Result<f64> {
    let n = view.len();
    let m = n.min(max_points);
    if m < 2 {
        return Err(MomError::argument(
            "the median heuristic needs at least 2 samples",
        ));
    }
    let idx: Vec<usize> = (0..m).map(|i| i * n / m).collect();
    let mut d2 = Vec::with_capacity(m * (m - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let (x, y) = (view.features(i), view.features(j));
            d2.push(x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>());
        }
    }
    let mid = (d2.len() - 1) / 2;
    let (_, med, _) = d2.select_nth_unstable_by(mid, f64::total_cmp);
    if *med <= 0.0 {
        return Err(MomError::numeric(
            "median pairwise distance is zero; pick gamma explicitly",
        ));
    }
    Ok(1.0 / *med)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelEvalStats {
    pub total: u64,
    /// Evaluations whose two training indices sit in different blocks.
    pub cross_block: u64,
}

/// Kernel evaluator over training indices that counts every call and flags
/// pairs straddling two blocks of a reference partition.
pub struct CountingKernel<'a> {
    spec: KernelSpec,
    view: TrainView<'a>,
    block_of: Vec<Option<usize>>,
    total: Cell<u64>,
    cross_block: Cell<u64>,
}

impl<'a> CountingKernel<'a> {
    pub fn new(spec: KernelSpec, view: TrainView<'a>, partition: &Partition) -> Result<Self> {
        spec.validate()?;
        check_dim(partition.n(), view.len())?;
        Ok(CountingKernel {
            spec,
            view,
            block_of: partition.block_of(),
            total: Cell::new(0),
            cross_block: Cell::new(0),
        })
    }

    #[inline]
    pub fn eval_pair(&self, i: usize, j: usize) -> f64 {
        self.total.set(self.total.get() + 1);
        if self.block_of[i].is_none() || self.block_of[i] != self.block_of[j] {
            self.cross_block.set(self.cross_block.get() + 1);
        }
        self.spec
            .eval_unchecked(self.view.features(i), self.view.features(j))
    }

    pub fn stats(&self) -> KernelEvalStats {
        KernelEvalStats {
            total: self.total.get(),
            cross_block: self.cross_block.get(),
        }
    }
}

/// The `K` within-block Gram matrices `N^k = (k(X_i, X_j))_{i,j in B_k}`.
/// The full `N x N` Gram matrix is never formed.
#[derive(Clone, Debug)]
pub struct BlockKernels {
    matrices: Vec<DMatrix<f64>>,
}

impl BlockKernels {
    pub fn build(view: TrainView<'_>, partition: &Partition, spec: &KernelSpec) -> Result<Self> {
        let kernel = CountingKernel::new(*spec, view, partition)?;
        Ok(Self::build_with(&kernel, partition))
    }

    /// Fills each symmetric block from its upper triangle through `kernel`.
    pub fn build_with(kernel: &CountingKernel<'_>, partition: &Partition) -> Self {
        let m = partition.block_size();
        let matrices = partition
            .blocks()
            .iter()
            .map(|block| {
                let mut g = DMatrix::zeros(m, m);
                for a in 0..m {
                    for b in a..m {
                        let v = kernel.eval_pair(block[a], block[b]);
                        g[(a, b)] = v;
                        g[(b, a)] = v;
                    }
                }
                g
            })
            .collect();
        BlockKernels { matrices }
    }

    pub fn k(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrix(&self, k: usize) -> &DMatrix<f64> {
        &self.matrices[k]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Stored kernel entries, `K * floor(N/K)^2`.
    pub fn entry_count(&self) -> usize {
        self.matrices.iter().map(|m| m.len()).sum()
    }
}

/// Score of training point `x_index` from its own block:
/// row `x_index` of `N^block` times `alpha` restricted to the block.
pub fn kernel_score(
    kernels: &BlockKernels,
    partition: &Partition,
    alpha: &[f64],
    block: usize,
    x_index: usize,
) -> Result<f64> {
    check_dim(partition.n(), alpha.len())?;
    if block >= partition.k() {
        return Err(MomError::argument(format!("block {block} out of range")));
    }
    let members = partition.block(block);
    let row = members
        .binary_search(&x_index)
        .map_err(|_| MomError::argument(format!("index {x_index} is not in block {block}")))?;
    let g = kernels.matrix(block);
    Ok(members
        .iter()
        .enumerate()
        .map(|(c, &j)| g[(row, c)] * alpha[j])
        .sum())
}

/// Kernel expansion `x -> sum_i alpha_i k(X_i, x)` over the training points,
/// together with the block structure it was trained with. Coefficients of
/// indices dropped by the partition are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelModelRepr", into = "KernelModelRepr")]
pub struct KernelModel {
    alpha: Vec<f64>,
    kernel: KernelSpec,
    partition: Partition,
    dim: usize,
    support: Vec<f64>,
}

impl KernelModel {
    pub fn new(
        alpha: Vec<f64>,
        kernel: KernelSpec,
        partition: Partition,
        view: TrainView<'_>,
    ) -> Result<Self> {
        check_dim(view.len(), alpha.len())?;
        check_dim(partition.n(), alpha.len())?;
        kernel.validate()?;
        let support = (0..view.len())
            .flat_map(|i| view.features(i).iter().copied())
            .collect();
        let model = KernelModel {
            alpha,
            kernel,
            partition,
            dim: view.dim(),
            support,
        };
        model.check_dropped()?;
        Ok(model)
    }

    fn check_dropped(&self) -> Result<()> {
        if self
            .partition
            .dropped()
            .iter()
            .any(|&i| self.alpha[i] != 0.0)
        {
            return Err(MomError::argument(
                "coefficients of dropped indices must be zero",
            ));
        }
        Ok(())
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn block_alpha(&self, k: usize) -> Vec<f64> {
        self.partition
            .block(k)
            .iter()
            .map(|&i| self.alpha[i])
            .collect()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn support_point(&self, i: usize) -> &[f64] {
        &self.support[i * self.dim..(i + 1) * self.dim]
    }
}

impl Classifier for KernelModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self
            .alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(i, &a)| a * self.kernel.eval_unchecked(self.support_point(i), x))
            .sum())
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct KernelModelRepr {
    alpha: Vec<f64>,
    kernel: KernelSpec,
    blocks: Vec<Vec<usize>>,
    support: Vec<Vec<f64>>,
}

impl From<KernelModel> for KernelModelRepr {
    fn from(m: KernelModel) -> Self {
        let support = (0..m.alpha.len())
            .map(|i| m.support_point(i).to_vec())
            .collect();
        KernelModelRepr {
            alpha: m.alpha,
            kernel: m.kernel,
            blocks: m.partition.blocks().to_vec(),
            support,
        }
    }
}

impl TryFrom<KernelModelRepr> for KernelModel {
    type Error = MomError;

    fn try_from(r: KernelModelRepr) -> Result<Self> {
        let n = r.alpha.len();
        check_dim(n, r.support.len())?;
        let dim = r.support.first().map_or(0, Vec::len);
        let mut support = Vec::with_capacity(n * dim);
        for row in &r.support {
            check_dim(dim, row.len())?;
            support.extend_from_slice(row);
        }
        r.kernel.validate()?;
        let model = KernelModel {
            alpha: r.alpha,
            kernel: r.kernel,
            partition: Partition::from_blocks(n, r.blocks)?,
            dim,
            support,
        };
        model.check_dropped()?;
        Ok(model)
    }
}
