//! Classifiers: linear scores with an intercept and kernel expansions over
//! training points. Predicted labels are `sign(score)` with `sign(0) = +1`.

mod kernel;

pub use kernel::{
    kernel_eval, kernel_score, median_heuristic_gamma, BlockKernels, CountingKernel,
    KernelEvalStats, KernelModel, KernelSpec,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{check_dim, MomError, Result};

pub trait Classifier {
    fn dim(&self) -> usize;

    fn score(&self, x: &[f64]) -> Result<f64>;

    fn predict(&self, x: &[f64]) -> Result<Label> {
        self.score(x).map(Label::from_score)
    }
}

/// `x -> <u, x> + b`. The intercept is not penalized anywhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(rename = "u")]
    pub weights: Vec<f64>,
    #[serde(rename = "b")]
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64) -> Self {
        LinearModel { weights, intercept }
    }

    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            intercept: 0.0,
        }
    }

    /// Parameters flattened as `(u_1, .., u_p, b)`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.intercept);
        p
    }

    pub fn from_params(params: &[f64]) -> Result<Self> {
        let (&b, u) = params
            .split_last()
            .ok_or_else(|| MomError::argument("empty parameter vector"))?;
        Ok(LinearModel::new(u.to_vec(), b))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (u, v)| acc + u * v)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.weights.iter().all(|v| v.is_finite()) && self.intercept.is_finite() {
            Ok(())
        } else {
            Err(MomError::Domain("model has non-finite parameters".into()))
        }
    }
}

impl Classifier for LinearModel {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x.len())?;
        Ok(self.score_unchecked(x))
    }
}

pub fn linear_score(model: &LinearModel, x: &[f64]) -> Result<f64> {
    model.score(x)
}

/// On-disk model: `{"type":"linear",...}` or `{"type":"kernel",...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SavedModel {
    Linear(LinearModel),
    Kernel(KernelModel),
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| MomError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MomError::io(path, e))?;
        Self::from_json(&text)
    }
}

impl Classifier for SavedModel {
    fn dim(&self) -> usize {
        match self {
            SavedModel::Linear(m) => m.dim(),
            SavedModel::Kernel(m) => m.dim(),
        }
    }

    fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            SavedModel::Linear(m) => m.score(x),
            SavedModel::Kernel(m) => m.score(x),
        }
    }
}

impl From<LinearModel> for SavedModel {
    fn from(m: LinearModel) -> Self {
        SavedModel::Linear(m)
    }
}

impl From<KernelModel> for SavedModel {
    fn from(m: KernelModel) -> Self {
        SavedModel::Kernel(m)
    }
}
