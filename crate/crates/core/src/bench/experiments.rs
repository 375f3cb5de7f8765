use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{accuracy, par_runs, ExperimentReport, RunRecord};
use crate::data::{generate_toy, Dataset};
use crate::error::{MomError, Result};
use crate::losses::LossKind;
use crate::model::LinearModel;
use crate::optim::{
    erm_gd_train, jittered_start, mom_gd_train, GradientForm, MomGdConfig, StepSchedule,
};
use crate::rng::RngSeed;

/// The corrupted toy comparison: MOM logistic, MOM hinge and ERM logistic
/// trained on the same data and scored on the same clean test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub n_test: usize,
    pub k: usize,
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub gradient: GradientForm,
    /// Step sizes of the full-batch (mean-gradient) ERM baseline.
    pub erm_schedule: StepSchedule,
    pub seed: RngSeed,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            n_inliers: 600,
            n_outliers: 30,
            n_test: 500,
            k: 120,
            iterations: 2000,
            schedule: StepSchedule::default(),
            gradient: GradientForm::Sum,
            erm_schedule: StepSchedule::default(),
            seed: RngSeed(0),
        }
    }
}

pub const MOM_LOGISTIC: &str = "mom-logistic";
pub const MOM_HINGE: &str = "mom-hinge";
pub const ERM_LOGISTIC: &str = "erm-logistic";

struct RunData {
    seed: RngSeed,
    train: Dataset,
    test: Dataset,
}

fn toy_run(
    master: RngSeed,
    run: usize,
    n_inliers: usize,
    n_outliers: usize,
    n_test: usize,
) -> Result<RunData> {
    let seed = master.derive(run as u64);
    Ok(RunData {
        seed,
        train: generate_toy(n_inliers, n_outliers, seed.derive(0))?,
        test: generate_toy(n_test, 0, seed.derive(1))?,
    })
}

fn mom_accuracy(data: &RunData, cfg: &MomGdConfig) -> Result<f64> {
    let (model, _) = mom_gd_train(
        data.train.view(),
        &jittered_start(data.train.dim(), cfg.seed),
        cfg,
    )?;
    accuracy(&model, &data.test)
}

pub(super) fn failed_run(
    methods: &[&str],
    setting: &str,
    run: usize,
    seed: u64,
    err: &MomError,
) -> Vec<RunRecord> {
    methods
        .iter()
        .map(|m| RunRecord {
            method: m.to_string(),
            setting: setting.to_string(),
            run,
            seed,
            value: None,
            wall_time_s: 0.0,
            error: Some(err.to_string()),
        })
        .collect()
}

/// `n_runs` fresh toy train/test pairs; records accuracies of
/// [`MOM_LOGISTIC`], [`MOM_HINGE`] and [`ERM_LOGISTIC`] per run.
pub fn run_robustness_experiment(
    n_runs: usize,
    cfg: &RobustnessConfig,
) -> Result<ExperimentReport> {
    if n_runs == 0 {
        return Err(MomError::argument("n_runs must be at least 1"));
    }
    let setting = format!("K={}", cfg.k);
    let methods = [MOM_LOGISTIC, MOM_HINGE, ERM_LOGISTIC];
    let per_run = par_runs(n_runs, |run| {
        let data = match toy_run(cfg.seed, run, cfg.n_inliers, cfg.n_outliers, cfg.n_test) {
            Ok(d) => d,
            Err(e) => {
                return failed_run(
                    &methods,
                    &setting,
                    run,
                    cfg.seed.derive(run as u64).value(),
                    &e,
                )
            }
        };
        let seed = data.seed.value();
        let mom = |loss: LossKind, stream: u64| MomGdConfig {
            schedule: cfg.schedule,
            gradient: cfg.gradient,
            ..MomGdConfig::new(cfg.k, cfg.iterations, loss, data.seed.derive(stream))
        };
        let mut out = Vec::with_capacity(3);
        let start = Instant::now();
        out.push(RunRecord::from_result(
            MOM_LOGISTIC,
            &setting,
            run,
            seed,
            start,
            mom_accuracy(&data, &mom(LossKind::Logistic, 2)),
        ));
        let start = Instant::now();
        out.push(RunRecord::from_result(
            MOM_HINGE,
            &setting,
            run,
            seed,
            start,
            mom_accuracy(&data, &mom(LossKind::Hinge, 3)),
        ));
        let start = Instant::now();
        let erm = erm_gd_train(
            data.train.view(),
            &LinearModel::zeros(data.train.dim()),
            cfg.iterations,
            cfg.erm_schedule,
            LossKind::Logistic,
        )
        .and_then(|m| accuracy(&m, &data.test));
        out.push(RunRecord::from_result(
            ERM_LOGISTIC,
            &setting,
            run,
            seed,
            start,
            erm,
        ));
        out
    });
    Ok(ExperimentReport::new(
        "robustness",
        cfg.seed.value(),
        per_run.into_iter().flatten().collect(),
    ))
}

/// Accuracy of MOM logistic regression across block counts on the toy
/// setup. Each run trains every `K` on the same data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KSweepConfig {
    pub n_inliers: usize,
    pub n_outliers: usize,
    pub n_test: usize,
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub gradient: GradientForm,
    pub seed: RngSeed,
}

impl Default for KSweepConfig {
    fn default() -> Self {
        KSweepConfig {
            n_inliers: 600,
            n_outliers: 30,
            n_test: 500,
            iterations: 2000,
            schedule: StepSchedule::default(),
            gradient: GradientForm::Sum,
            seed: RngSeed(0),
        }
    }
}

/// Records one [`MOM_LOGISTIC`] accuracy per `K` and run, with setting
/// `K=<k>`. Every `K` must lie in `1..=N/2`.
pub fn run_k_sweep(
    k_values: &[usize],
    n_runs: usize,
    cfg: &KSweepConfig,
) -> Result<ExperimentReport> {
    if n_runs == 0 {
        return Err(MomError::argument("n_runs must be at least 1"));
    }
    if k_values.is_empty() {
        return Err(MomError::argument("k_values must not be empty"));
    }
    let n = cfg.n_inliers + cfg.n_outliers;
    if let Some(&bad) = k_values.iter().find(|&&k| k == 0 || (k > 1 && k > n / 2)) {
        return Err(MomError::argument(format!("K={bad} outside 1..={}", n / 2)));
    }
    let per_run = par_runs(n_runs, |run| {
        let settings: Vec<String> = k_values.iter().map(|k| format!("K={k}")).collect();
        let data = match toy_run(cfg.seed, run, cfg.n_inliers, cfg.n_outliers, cfg.n_test) {
            Ok(d) => d,
            Err(e) => {
                let seed = cfg.seed.derive(run as u64).value();
                return settings
                    .iter()
                    .flat_map(|s| failed_run(&[MOM_LOGISTIC], s, run, seed, &e))
                    .collect();
            }
        };
        k_values
            .iter()
            .zip(&settings)
            .map(|(&k, setting)| {
                let start = Instant::now();
                let mom = MomGdConfig {
                    schedule: cfg.schedule,
                    gradient: cfg.gradient,
                    ..MomGdConfig::new(
                        k,
                        cfg.iterations,
                        LossKind::Logistic,
                        data.seed.derive(2).derive(k as u64),
                    )
                };
                RunRecord::from_result(
                    MOM_LOGISTIC,
                    setting,
                    run,
                    data.seed.value(),
                    start,
                    mom_accuracy(&data, &mom),
                )
            })
            .collect::<Vec<_>>()
    });
    Ok(ExperimentReport::new(
        "k-sweep",
        cfg.seed.value(),
        per_run.into_iter().flatten().collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_without_outliers_matches_erm() {
        let cfg = RobustnessConfig {
            n_outliers: 0,
            k: 1,
            iterations: 200,
            gradient: GradientForm::Mean,
            seed: RngSeed(5),
            ..RobustnessConfig::default()
        };
        let report = run_robustness_experiment(1, &cfg).unwrap();
        assert_eq!(report.records.len(), 3);
        assert_eq!(
            report.values(MOM_LOGISTIC, "K=1"),
            report.values(ERM_LOGISTIC, "K=1")
        );
        assert!(run_robustness_experiment(0, &cfg).is_err());
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let cfg = KSweepConfig {
            n_inliers: 100,
            n_outliers: 5,
            n_test: 100,
            iterations: 50,
            seed: RngSeed(9),
            ..KSweepConfig::default()
        };
        let a = run_k_sweep(&[1, 5, 20], 3, &cfg).unwrap();
        let b = run_k_sweep(&[1, 5, 20], 3, &cfg).unwrap();
        assert_eq!(a.records.len(), 9);
        assert_eq!(a.summaries.len(), 3);
        assert!(a.same_outcomes(&b));
        assert!(run_k_sweep(&[60], 1, &cfg).is_err());
        assert!(run_k_sweep(&[0], 1, &cfg).is_err());
    }

    #[test]
    fn training_errors_are_recorded() {
        let cfg = RobustnessConfig {
            n_inliers: 20,
            n_outliers: 0,
            n_test: 20,
            k: 25,
            iterations: 5,
            ..RobustnessConfig::default()
        };
        let report = run_robustness_experiment(2, &cfg).unwrap();
        let mom = report.summary(MOM_LOGISTIC, "K=25").unwrap();
        assert_eq!((mom.count, mom.failures), (0, 2));
        assert_eq!(report.summary(ERM_LOGISTIC, "K=25").unwrap().count, 2);
    }
}
