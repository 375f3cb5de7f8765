//! Seeded experiment drivers and their reports.
//!
//! Every experiment takes a master seed. Run `r` works from
//! `master.derive(r)` and splits that further per purpose (training data,
//! test data, partitions), so records do not depend on how runs are
//! scheduled across threads. Records come back in run order.

mod experiments;
mod rates;
mod timing;

pub use experiments::{
    run_k_sweep, run_robustness_experiment, KSweepConfig, RobustnessConfig, ERM_LOGISTIC,
    MOM_HINGE, MOM_LOGISTIC,
};
pub use rates::{
    logistic_newton, run_rate_experiment, run_rate_experiment_with, RateConfig, RateDataset,
};
pub use timing::{run_timing_probe, TimingAlgorithm, TimingConfig};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, MomError, Result};
use crate::model::Classifier;

/// Fraction of test points whose predicted label matches.
pub fn accuracy(model: &impl Classifier, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(MomError::argument("accuracy needs a non-empty test set"));
    }
    check_dim(model.dim(), test.dim())?;
    let mut correct = 0usize;
    for i in 0..test.len() {
        if model.predict(test.features(i))? == test.label(i) {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// One method on one run of one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    /// Experiment-specific setting, e.g. `K=120` or `n=4000`.
    pub setting: String,
    pub run: usize,
    pub seed: u64,
    /// Accuracy or excess risk; `None` when the run failed.
    pub value: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl RunRecord {
    fn from_result(
        method: &str,
        setting: &str,
        run: usize,
        seed: u64,
        start: Instant,
        value: Result<f64>,
    ) -> Self {
        let wall_time_s = start.elapsed().as_secs_f64();
        let (value, error) = match value {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        RunRecord {
            method: method.to_string(),
            setting: setting.to_string(),
            run,
            seed,
            value,
            wall_time_s,
            error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub setting: String,
    /// Successful runs.
    pub count: usize,
    pub failures: usize,
    /// `None` when every run failed.
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// The `(log x, log y)` points used.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub master_seed: u64,
    pub records: Vec<RunRecord>,
    pub summaries: Vec<Summary>,
    pub slope_fit: Option<SlopeFit>,
    /// Named scalars specific to an experiment (ratios, storage sizes).
    pub extras: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str, master_seed: u64, records: Vec<RunRecord>) -> Self {
        let summaries = summarize(&records);
        ExperimentReport {
            name: name.to_string(),
            master_seed,
            records,
            summaries,
            slope_fit: None,
            extras: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn summary(&self, method: &str, setting: &str) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.setting == setting)
    }

    /// Successful values of one method and setting, in run order.
    pub fn values(&self, method: &str, setting: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.setting == setting)
            .filter_map(|r| r.value)
            .collect()
    }

    /// True when both reports hold the same records up to wall times.
    pub fn same_outcomes(&self, other: &ExperimentReport) -> bool {
        let key = |r: &RunRecord| {
            (
                r.method.clone(),
                r.setting.clone(),
                r.run,
                r.seed,
                r.value.map(f64::to_bits),
                r.error.clone(),
            )
        };
        self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .map(key)
                .eq(other.records.iter().map(key))
            && self.slope_fit == other.slope_fit
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat CSV of the records, one row per method and run.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| MomError::io("<report>", std::io::Error::other(e));
        for r in &self.records {
            out.serialize(r).map_err(csv_err)?;
        }
        out.flush().map_err(|e| MomError::io("<report>", e))
    }

    /// Writes `<stem>.json` and `<stem>.csv`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        let json = stem.with_extension("json");
        std::fs::write(&json, self.to_json()?).map_err(|e| MomError::io(&json, e))?;
        let csv_path = stem.with_extension("csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| MomError::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per (method, setting) statistics, in order of first appearance.
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in records {
        let key = (r.method.as_str(), r.setting.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, setting)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.method == method && r.setting == setting)
                .collect();
            let mut values: Vec<f64> = group.iter().filter_map(|r| r.value).collect();
            values.sort_by(f64::total_cmp);
            let stat = |f: &dyn Fn(&[f64]) -> f64| (!values.is_empty()).then(|| f(&values));
            let mean = stat(&|v| v.iter().sum::<f64>() / v.len() as f64);
            let median = stat(&|v| quantile(v, 0.5));
            let q1 = stat(&|v| quantile(v, 0.25));
            let q3 = stat(&|v| quantile(v, 0.75));
            Summary {
                method: method.to_string(),
                setting: setting.to_string(),
                count: values.len(),
                failures: group.len() - values.len(),
                mean,
                median,
                q1,
                q3,
            }
        })
        .collect()
}

/// Fits `log y = slope * log x + intercept`. Points with a non-positive
/// `y` are skipped and reported in the returned warnings.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<(SlopeFit, Vec<String>)> {
    check_dim(xs.len(), ys.len())?;
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if x > 0.0 && y > 0.0 && y.is_finite() {
            points.push((x.ln(), y.ln()));
        } else {
            warnings.push(format!("dropped point x={x}, y={y}: logarithm undefined"));
        }
    }
    if points.len() < 2 {
        return Err(MomError::argument(
            "slope fit needs at least 2 positive points",
        ));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(MomError::argument(
            "slope fit needs at least 2 distinct x values",
        ));
    }
    let slope = sxy / sxx;
    // A flat response is fitted exactly by the flat line.
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok((
        SlopeFit {
            slope,
            intercept: my - slope * mx,
            r2,
            points,
        },
        warnings,
    ))
}

fn par_runs<T: Send>(n_runs: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n_runs).into_par_iter().map(f).collect()
}
