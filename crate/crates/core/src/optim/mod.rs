//! Descent engines.
//!
//! - [`mom_gd_train`]: MOM gradient descent. Each step draws a fresh random
//!   equipartition, finds the block whose mean loss is the median, and steps
//!   along the summed gradient of that block only.
//! - [`erm_gd_train`]: full-batch gradient descent on the empirical risk.
//! - [`fast_klr_mom_train`]: kernel logistic regression on a fixed partition
//!   with per-block Gram matrices and damped IRLS steps on the median block.
//! - [`klr_mom_full_train`]: the same update driven by the full Gram matrix and
//!   a fresh partition per step; the reference point for Fast KLR MOM timings.
//!
//! # Step sizes
//!
//! The MOM update is `u <- u - eta_t * sum_{i in B_med} grad l_i`, literally a
//! block sum. [`GradientForm::Mean`] divides by the block size instead, which
//! is the same as running the sum form with `eta_t / floor(N/K)`.

mod gd;
mod klr;
mod objective;

pub use gd::{erm_gd_path, erm_gd_train, mom_gd_train};
pub use klr::{fast_klr_mom_train, fast_klr_mom_train_with_partition, klr_mom_full_train};
pub use objective::{
    empirical_risk, expected_mom_objective, median_block_gradient_check, mom_objective,
    GradientCheck,
};

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{MomError, Result};
use crate::losses::LossKind;
use crate::model::{KernelEvalStats, KernelSpec, LinearModel};
use crate::rng::RngSeed;

/// Standard deviation of [`jittered_start`].
pub const START_SD: f64 = 1e-3;

/// Seeded `N(0, START_SD^2)` starting point for [`mom_gd_train`], drawn from
/// stream `u64::MAX` of the training seed so it never overlaps a step's
/// partition stream.
///
/// At exactly zero every sample has the same loss, so all block means tie
/// and the first median block is whichever wins the tie-break; when it holds
/// an outlier the run can settle next to it. A tiny perturbation restores a
/// real ranking at the first step, in which large-norm points sit in the
/// tails.
pub fn jittered_start(dim: usize, seed: RngSeed) -> LinearModel {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = seed.derive(u64::MAX).rng();
    let mut draw = || {
        let z: f64 = StandardNormal.sample(&mut rng);
        START_SD * z
    };
    let weights = (0..dim).map(|_| draw()).collect();
    LinearModel::new(weights, draw())
}

/// Step-size sequence `(eta_t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `eta0 / (t + 1)`: divergent sum, summable squares.
    InverseT { eta0: f64 },
    /// Constant `eta`. Does not have summable squares; meant for the ERM
    /// baseline and diagnostics.
    Constant { eta: f64 },
}

impl StepSchedule {
    #[inline]
    pub fn step(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::InverseT { eta0 } => eta0 / (t as f64 + 1.0),
            StepSchedule::Constant { eta } => eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            StepSchedule::InverseT { eta0 } => eta0,
            StepSchedule::Constant { eta } => eta,
        };
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(MomError::argument(format!(
                "step size must be finite and non-negative, got {v}"
            )))
        }
    }

    /// Same schedule with every step multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> StepSchedule {
        match *self {
            StepSchedule::InverseT { eta0 } => StepSchedule::InverseT {
                eta0: eta0 * factor,
            },
            StepSchedule::Constant { eta } => StepSchedule::Constant { eta: eta * factor },
        }
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::InverseT { eta0: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientForm {
    /// Sum of per-sample gradients over the median block.
    #[default]
    Sum,
    /// Mean over the median block.
    Mean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Repartition {
    /// Fresh uniform partition at every step.
    #[default]
    EveryStep,
    /// One partition drawn before the first step and kept.
    Fixed,
}

/// Configuration of [`mom_gd_train`]. The usual block range is
/// `3 <= k <= N/2`; only `1 <= k <= N` is enforced, so that `k = 1`
/// reproduces full-batch ERM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomGdConfig {
    pub k: usize,
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub loss: LossKind,
    pub seed: RngSeed,
    pub record_selections: bool,
    pub record_iterates: bool,
    pub gradient: GradientForm,
    pub repartition: Repartition,
}

impl MomGdConfig {
    pub fn new(k: usize, iterations: usize, loss: LossKind, seed: RngSeed) -> Self {
        MomGdConfig {
            k,
            iterations,
            loss,
            seed,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(MomError::argument(format!(
                "block count K={} must lie in 1..={n}",
                self.k
            )));
        }
        if self.iterations == 0 {
            return Err(MomError::argument("iteration count T must be at least 1"));
        }
        if !self.loss.is_differentiable() {
            return Err(MomError::Unsupported(format!(
                "cannot train with the {} loss",
                self.loss
            )));
        }
        self.schedule.validate()
    }
}

impl Default for MomGdConfig {
    fn default() -> Self {
        MomGdConfig {
            k: 10,
            iterations: 2000,
            schedule: StepSchedule::default(),
            loss: LossKind::Logistic,
            seed: RngSeed(0),
            record_selections: false,
            record_iterates: false,
            gradient: GradientForm::Sum,
            repartition: Repartition::EveryStep,
        }
    }
}

/// Configuration of the kernel logistic engines. `beta > 0` weighs the
/// penalty `sum_k (alpha^k)^T N^k alpha^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FastKlrConfig {
    pub k: usize,
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub beta: f64,
    pub kernel: KernelSpec,
    pub seed: RngSeed,
    pub record_selections: bool,
}

impl FastKlrConfig {
    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n {
            return Err(MomError::argument(format!(
                "block count K={} must lie in 1..={n}",
                self.k
            )));
        }
        if self.iterations == 0 {
            return Err(MomError::argument("iteration count T must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(MomError::argument(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        self.kernel.validate()?;
        self.schedule.validate()
    }
}

impl Default for FastKlrConfig {
    fn default() -> Self {
        FastKlrConfig {
            k: 10,
            iterations: 100,
            schedule: StepSchedule::InverseT { eta0: 1.0 },
            beta: 1e-3,
            kernel: KernelSpec::Linear,
            seed: RngSeed(0),
            record_selections: false,
        }
    }
}

/// One descent step's median block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub t: usize,
    /// Seed of the partition used at this step.
    pub partition_seed: u64,
    pub k_med: usize,
    pub members: Vec<usize>,
    /// Objective value of the median block at the current iterate.
    pub objective: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Parameter snapshots `theta_0, .., theta_T` when requested.
    pub iterates: Option<Vec<Vec<f64>>>,
    /// One record per step when requested.
    pub selections: Option<Vec<SelectionRecord>>,
    /// Objective at the returned parameters.
    pub final_objective: f64,
    pub kernel_evals: Option<KernelEvalStats>,
}

impl TrainTrace {
    /// One JSON object per line, one line per step.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let records = self
            .selections
            .as_ref()
            .ok_or_else(|| MomError::argument("trace has no recorded selections"))?;
        for rec in records {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n").map_err(|e| MomError::io("<trace>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<TrainTrace> {
        let mut selections = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| MomError::io("<trace>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SelectionRecord =
                serde_json::from_str(&line).map_err(|e| MomError::Parse {
                    row: i + 1,
                    message: e.to_string(),
                })?;
            selections.push(rec);
        }
        let final_objective = selections.last().map_or(f64::NAN, |r| r.objective);
        Ok(TrainTrace {
            selections: Some(selections),
            final_objective,
            ..Default::default()
        })
    }
}
