//! Labelled datasets, synthetic generators, CSV ingestion and random
//! equipartitions.
//!
//! A [`Dataset`] may carry ground-truth outlier flags for evaluation. Training
//! code never sees them: every optimizer takes a [`TrainView`], which only
//! exposes features and labels.

mod csv_io;
mod generate;
mod partition;

pub use csv_io::{load_csv, read_csv, write_csv, LabelColumn};
pub use generate::{
    generate_gaussians, generate_moons, generate_toy, generate_toy_with, ToyParams,
};
pub use partition::Partition;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, MomError, Result};

/// Binary label in {-1, +1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    /// `sign(score)` with `sign(0) = +1`.
    #[inline]
    pub fn from_score(score: f64) -> Label {
        if score >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// 0/1 encoding used by the IRLS working response.
    #[inline]
    pub fn indicator(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }
}

impl TryFrom<f64> for Label {
    type Error = MomError;

    fn try_from(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Label::Positive)
        } else if v == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(MomError::Domain(format!("label must be -1 or +1, got {v}")))
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Negative => f.write_str("-1"),
            Label::Positive => f.write_str("1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Label,
    pub is_outlier: Option<bool>,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Label) -> Self {
        Sample {
            x,
            y,
            is_outlier: None,
        }
    }
}

/// Immutable set of `N >= 1` labelled points in `R^p`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
    outliers: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        Self::with_outlier_flags(dim, features, labels, None)
    }

    pub fn with_outlier_flags(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<Label>,
        outliers: Option<Vec<bool>>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(MomError::argument(
                "dataset must contain at least one sample",
            ));
        }
        if dim == 0 {
            return Err(MomError::argument("feature dimension must be positive"));
        }
        check_dim(labels.len() * dim, features.len())?;
        if let Some(flags) = &outliers {
            check_dim(labels.len(), flags.len())?;
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(MomError::Domain(format!(
                "non-finite feature in sample {}",
                pos / dim
            )));
        }
        Ok(Dataset {
            dim,
            features,
            labels,
            outliers,
        })
    }

    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.x.len())
            .ok_or_else(|| MomError::argument("dataset must contain at least one sample"))?;
        let flagged = samples.iter().any(|s| s.is_outlier.is_some());
        let mut features = Vec::with_capacity(samples.len() * dim);
        let mut labels = Vec::with_capacity(samples.len());
        let mut flags = Vec::with_capacity(if flagged { samples.len() } else { 0 });
        for s in samples {
            check_dim(dim, s.x.len())?;
            features.extend_from_slice(&s.x);
            labels.push(s.y);
            if flagged {
                flags.push(s.is_outlier.unwrap_or(false));
            }
        }
        Self::with_outlier_flags(dim, features, labels, flagged.then_some(flags))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn outlier_flags(&self) -> Option<&[bool]> {
        self.outliers.as_deref()
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            x: self.features(i).to_vec(),
            y: self.labels[i],
            is_outlier: self.outliers.as_ref().map(|f| f[i]),
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// The training-facing view: features and labels only.
    pub fn view(&self) -> TrainView<'_> {
        TrainView {
            dim: self.dim,
            features: &self.features,
            labels: &self.labels,
        }
    }

    /// Copy of the dataset without ground-truth flags.
    pub fn without_flags(&self) -> Dataset {
        Dataset {
            outliers: None,
            ..self.clone()
        }
    }

    pub(crate) fn shuffled(self, rng: &mut impl rand::Rng) -> Dataset {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        let mut features = Vec::with_capacity(self.features.len());
        for &i in &order {
            features.extend_from_slice(self.features(i));
        }
        Dataset {
            dim: self.dim,
            features,
            labels: order.iter().map(|&i| self.labels[i]).collect(),
            outliers: self
                .outliers
                .as_ref()
                .map(|f| order.iter().map(|&i| f[i]).collect()),
        }
    }
}

/// Borrowed features and labels of a [`Dataset`].
#[derive(Clone, Copy, Debug)]
pub struct TrainView<'a> {
    dim: usize,
    features: &'a [f64],
    labels: &'a [Label],
}

impl<'a> TrainView<'a> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn features(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }
}
