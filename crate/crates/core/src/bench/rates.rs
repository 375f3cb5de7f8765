use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::experiments::{failed_run, MOM_LOGISTIC};
use super::{fit_log_log, par_runs, ExperimentReport, RunRecord};
use crate::data::{generate_gaussians, generate_moons, Dataset, TrainView};
use crate::error::{MomError, Result};
use crate::losses::{sigmoid, LossKind};
use crate::model::{Classifier, LinearModel};
use crate::optim::{jittered_start, mom_gd_train, GradientForm, MomGdConfig, StepSchedule};
use crate::rng::RngSeed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateDataset {
    Moons,
    Gaussians,
}

impl std::str::FromStr for RateDataset {
    type Err = MomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moons" => Ok(RateDataset::Moons),
            "gaussians" => Ok(RateDataset::Gaussians),
            other => Err(MomError::argument(format!(
                "unknown rate dataset {other:?}"
            ))),
        }
    }
}

impl RateDataset {
    fn name(self) -> &'static str {
        match self {
            RateDataset::Moons => "moons",
            RateDataset::Gaussians => "gaussians",
        }
    }
}

/// Excess 0-1 risk `|R(f_hat) - R(f*)|` against sample size.
///
/// `f*` is the exact logistic ERM ([`logistic_newton`]) on a clean sample of
/// `reference_factor * max(n_values)` points, and both risks are estimated on
/// one shared test sample of `n_test` points, so that only the points where
/// the two classifiers disagree contribute noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateConfig {
    pub k: usize,
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub gradient: GradientForm,
    pub n_test: usize,
    pub reference_factor: usize,
    pub moons_noise: f64,
    pub seed: RngSeed,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            k: 5,
            iterations: 2000,
            schedule: StepSchedule::InverseT { eta0: 20.0 },
            gradient: GradientForm::Mean,
            n_test: 2_000_000,
            reference_factor: 10,
            moons_noise: 0.3,
            seed: RngSeed(0),
        }
    }
}

impl RateConfig {
    fn generate(&self, kind: RateDataset, n: usize, seed: RngSeed) -> Result<Dataset> {
        match kind {
            RateDataset::Moons => generate_moons(n, self.moons_noise, seed),
            RateDataset::Gaussians => generate_gaussians(n, seed),
        }
    }
}

/// Unpenalized logistic regression with intercept by Newton's method on
/// the mean log-loss. Fails on separable data, where no minimizer exists.
pub fn logistic_newton(view: TrainView<'_>) -> Result<LinearModel> {
    let p = view.dim();
    let n = view.len() as f64;
    let mut theta = DVector::<f64>::zeros(p + 1);
    let mut z = DVector::<f64>::zeros(p + 1);
    for _ in 0..100 {
        let mut grad = DVector::<f64>::zeros(p + 1);
        let mut hess = DMatrix::<f64>::zeros(p + 1, p + 1);
        for i in 0..view.len() {
            z.rows_mut(0, p).copy_from_slice(view.features(i));
            z[p] = 1.0;
            let pi = sigmoid(theta.dot(&z));
            grad.axpy(pi - view.label(i).indicator(), &z, 1.0);
            hess.ger(pi * (1.0 - pi), &z, &z, 1.0);
        }
        grad /= n;
        hess /= n;
        let step = hess
            .cholesky()
            .ok_or_else(|| MomError::numeric("logistic Hessian is singular (separable data?)"))?
            .solve(&grad);
        theta -= &step;
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(MomError::numeric("Newton iterates diverged"));
        }
        if step.amax() <= 1e-12 * (1.0 + theta.amax()) {
            return Ok(LinearModel::new(
                theta.rows(0, p).iter().copied().collect(),
                theta[p],
            ));
        }
    }
    Err(MomError::numeric(
        "Newton's method did not converge in 100 steps",
    ))
}

fn misclassified(model: &impl Classifier, test: &Dataset) -> Result<Vec<bool>> {
    (0..test.len())
        .map(|i| Ok(model.predict(test.features(i))? != test.label(i)))
        .collect()
}

/// Rate experiment with MOM logistic regression as the learner.
pub fn run_rate_experiment(
    kind: RateDataset,
    n_values: &[usize],
    n_runs: usize,
    cfg: &RateConfig,
) -> Result<ExperimentReport> {
    let train = |ds: &Dataset, seed: RngSeed| -> Result<LinearModel> {
        let mom = MomGdConfig {
            schedule: cfg.schedule,
            gradient: cfg.gradient,
            ..MomGdConfig::new(cfg.k, cfg.iterations, LossKind::Logistic, seed)
        };
        Ok(mom_gd_train(ds.view(), &jittered_start(ds.dim(), seed), &mom)?.0)
    };
    run_rate_experiment_with(kind, n_values, n_runs, cfg, &train)
}

/// Rate experiment with any learner `train(data, seed)`. Records one
/// `|excess|` per run and `n` (setting `n=<n>`) and fits the log-log slope of
/// the per-`n` mean.
pub fn run_rate_experiment_with(
    kind: RateDataset,
    n_values: &[usize],
    n_runs: usize,
    cfg: &RateConfig,
    train: &(dyn Fn(&Dataset, RngSeed) -> Result<LinearModel> + Sync),
) -> Result<ExperimentReport> {
    if n_values.len() < 4 {
        return Err(MomError::argument(
            "rate experiments need at least 4 sample sizes",
        ));
    }
    if n_values.windows(2).any(|w| w[0] >= w[1]) || n_values[0] == 0 {
        return Err(MomError::argument(
            "sample sizes must be positive and strictly increasing",
        ));
    }
    if n_runs == 0 || cfg.n_test == 0 || cfg.reference_factor == 0 {
        return Err(MomError::argument(
            "n_runs, n_test and reference_factor must be positive",
        ));
    }
    let max_n = *n_values.last().expect("checked non-empty");
    let settings: Vec<String> = n_values.iter().map(|n| format!("n={n}")).collect();

    let per_run = par_runs(n_runs, |run| {
        let seed = cfg.seed.derive(run as u64);
        let reference = (|| {
            let big = cfg.generate(kind, cfg.reference_factor * max_n, seed.derive(0))?;
            let f_star = logistic_newton(big.view())?;
            let test = cfg.generate(kind, cfg.n_test, seed.derive(1))?;
            let star_wrong = misclassified(&f_star, &test)?;
            Ok::<_, MomError>((test, star_wrong))
        })();
        let (test, star_wrong) = match reference {
            Ok(r) => r,
            Err(e) => {
                return settings
                    .iter()
                    .flat_map(|s| failed_run(&[MOM_LOGISTIC], s, run, seed.value(), &e))
                    .collect();
            }
        };
        n_values
            .iter()
            .zip(&settings)
            .map(|(&n, setting)| {
                let start = Instant::now();
                let excess = (|| {
                    let data = cfg.generate(kind, n, seed.derive(2).derive(n as u64))?;
                    let model = train(&data, seed.derive(3).derive(n as u64))?;
                    let wrong = misclassified(&model, &test)?;
                    let diff: i64 = wrong
                        .iter()
                        .zip(&star_wrong)
                        .map(|(&a, &b)| a as i64 - b as i64)
                        .sum();
                    Ok((diff as f64 / cfg.n_test as f64).abs())
                })();
                RunRecord::from_result(MOM_LOGISTIC, setting, run, seed.value(), start, excess)
            })
            .collect::<Vec<_>>()
    });

    let mut report = ExperimentReport::new(
        &format!("rates-{}", kind.name()),
        cfg.seed.value(),
        per_run.into_iter().flatten().collect(),
    );
    let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = settings
        .iter()
        .map(|s| {
            report
                .summary(MOM_LOGISTIC, s)
                .and_then(|s| s.mean)
                .unwrap_or(f64::NAN)
        })
        .collect();
    match fit_log_log(&xs, &ys) {
        Ok((fit, warnings)) => {
            report.slope_fit = Some(fit);
            report.warnings.extend(warnings);
        }
        Err(e) => report.warnings.push(format!("no slope fit: {e}")),
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::erm_gd_train;

    fn small() -> RateConfig {
        RateConfig {
            iterations: 200,
            n_test: 5000,
            reference_factor: 2,
            seed: RngSeed(4),
            ..RateConfig::default()
        }
    }

    #[test]
    fn newton_matches_long_gradient_descent() {
        let ds = generate_gaussians(400, RngSeed(2)).unwrap();
        let newton = logistic_newton(ds.view()).unwrap();
        let gd = erm_gd_train(
            ds.view(),
            &LinearModel::zeros(2),
            20000,
            StepSchedule::Constant { eta: 1.0 },
            LossKind::Logistic,
        )
        .unwrap();
        for (a, b) in newton.params().iter().zip(gd.params()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn newton_rejects_separable_data() {
        let ds = Dataset::new(
            1,
            vec![-2.0, -1.0, 1.0, 2.0],
            vec![
                crate::data::Label::Negative,
                crate::data::Label::Negative,
                crate::data::Label::Positive,
                crate::data::Label::Positive,
            ],
        )
        .unwrap();
        assert!(logistic_newton(ds.view()).is_err());
    }

    #[test]
    fn constant_predictor_has_flat_slope() {
        let stub = |_: &Dataset, _: RngSeed| Ok(LinearModel::new(vec![0.3, 1.0], 0.2));
        let report = run_rate_experiment_with(
            RateDataset::Gaussians,
            &[100, 200, 400, 800],
            2,
            &small(),
            &stub,
        )
        .unwrap();
        let fit = report.slope_fit.unwrap();
        assert!(fit.slope.abs() < 1e-12, "{}", fit.slope);
    }

    #[test]
    fn grid_validation() {
        let cfg = small();
        assert!(run_rate_experiment(RateDataset::Moons, &[100, 200, 400], 1, &cfg).is_err());
        assert!(run_rate_experiment(RateDataset::Moons, &[100, 400, 200, 800], 1, &cfg).is_err());
    }

    #[test]
    fn small_run_is_deterministic() {
        let cfg = small();
        let a = run_rate_experiment(RateDataset::Moons, &[100, 200, 400, 800], 2, &cfg).unwrap();
        let b = run_rate_experiment(RateDataset::Moons, &[100, 200, 400, 800], 2, &cfg).unwrap();
        assert_eq!(a.records.len(), 8);
        assert!(a.same_outcomes(&b));
        assert!(a.records.iter().all(|r| r.value.is_some_and(|v| v >= 0.0)));
    }
}
