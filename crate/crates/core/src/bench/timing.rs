use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{accuracy, ExperimentReport, RunRecord};
use crate::data::{generate_gaussians, Dataset};
use crate::error::{MomError, Result};
use crate::losses::LossKind;
use crate::model::{KernelSpec, LinearModel};
use crate::optim::{
    erm_gd_train, fast_klr_mom_train, jittered_start, klr_mom_full_train, mom_gd_train,
    FastKlrConfig, MomGdConfig, StepSchedule,
};
use crate::rng::RngSeed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingAlgorithm {
    MomLogistic,
    MomHinge,
    ErmLogistic,
    FastKlrMom,
    KlrMomFull,
}

impl TimingAlgorithm {
    pub const ALL: [TimingAlgorithm; 5] = [
        TimingAlgorithm::MomLogistic,
        TimingAlgorithm::MomHinge,
        TimingAlgorithm::ErmLogistic,
        TimingAlgorithm::FastKlrMom,
        TimingAlgorithm::KlrMomFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimingAlgorithm::MomLogistic => "mom-logistic",
            TimingAlgorithm::MomHinge => "mom-hinge",
            TimingAlgorithm::ErmLogistic => "erm-logistic",
            TimingAlgorithm::FastKlrMom => "fast-klr-mom",
            TimingAlgorithm::KlrMomFull => "klr-mom-full",
        }
    }
}

impl std::str::FromStr for TimingAlgorithm {
    type Err = MomError;

    fn from_str(s: &str) -> Result<Self> {
        TimingAlgorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| MomError::argument(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    pub k: usize,
    /// Steps of the linear engines.
    pub iterations: usize,
    /// Steps of the kernel engines.
    pub kernel_iterations: usize,
    pub kernel: KernelSpec,
    pub beta: f64,
    pub n_test: usize,
    pub seed: RngSeed,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            k: 20,
            iterations: 2000,
            kernel_iterations: 30,
            kernel: KernelSpec::Rbf { gamma: 0.5 },
            beta: 1e-3,
            n_test: 1000,
            seed: RngSeed(0),
        }
    }
}

fn train_and_test(
    algo: TimingAlgorithm,
    train: &Dataset,
    test: &Dataset,
    cfg: &TimingConfig,
) -> Result<f64> {
    let zeros = LinearModel::zeros(train.dim());
    let klr = FastKlrConfig {
        k: cfg.k,
        iterations: cfg.kernel_iterations,
        beta: cfg.beta,
        kernel: cfg.kernel,
        seed: cfg.seed.derive(2),
        ..FastKlrConfig::default()
    };
    match algo {
        TimingAlgorithm::MomLogistic | TimingAlgorithm::MomHinge => {
            let loss = if algo == TimingAlgorithm::MomLogistic {
                LossKind::Logistic
            } else {
                LossKind::Hinge
            };
            let mom = MomGdConfig::new(cfg.k, cfg.iterations, loss, cfg.seed.derive(2));
            let start = jittered_start(train.dim(), mom.seed);
            accuracy(&mom_gd_train(train.view(), &start, &mom)?.0, test)
        }
        TimingAlgorithm::ErmLogistic => {
            let m = erm_gd_train(
                train.view(),
                &zeros,
                cfg.iterations,
                StepSchedule::default(),
                LossKind::Logistic,
            )?;
            accuracy(&m, test)
        }
        TimingAlgorithm::FastKlrMom => accuracy(&fast_klr_mom_train(train.view(), &klr)?.0, test),
        TimingAlgorithm::KlrMomFull => accuracy(&klr_mom_full_train(train.view(), &klr)?.0, test),
    }
}

/// Wall-clock train+test time of each algorithm on `generate_gaussians(n)`.
///
/// Each algorithm runs once untimed as a warm-up, then once timed. Records
/// carry the test accuracy as value and the time as `wall_time_s`; the
/// extras hold `ratio:<algo>` (time over the fastest) and
/// `kernel_entries:<algo>` for the kernel engines.
pub fn run_timing_probe(
    algorithms: &[TimingAlgorithm],
    n: usize,
    cfg: &TimingConfig,
) -> Result<ExperimentReport> {
    if algorithms.is_empty() {
        return Err(MomError::argument("no algorithms to time"));
    }
    if n < cfg.k || cfg.k == 0 {
        return Err(MomError::argument(format!(
            "need 1 <= K <= n, got K={} and n={n}",
            cfg.k
        )));
    }
    let train = generate_gaussians(n, cfg.seed.derive(0))?;
    let test = generate_gaussians(cfg.n_test, cfg.seed.derive(1))?;
    let setting = format!("n={n}");
    let records: Vec<RunRecord> = algorithms
        .iter()
        .map(|&algo| {
            let _ = train_and_test(algo, &train, &test, cfg);
            let start = Instant::now();
            let value = train_and_test(algo, &train, &test, cfg);
            RunRecord::from_result(algo.name(), &setting, 0, cfg.seed.value(), start, value)
        })
        .collect();

    let mut report = ExperimentReport::new("timing", cfg.seed.value(), records);
    let fastest = report
        .records
        .iter()
        .map(|r| r.wall_time_s)
        .fold(f64::INFINITY, f64::min);
    let ratios: Vec<(String, f64)> = report
        .records
        .iter()
        .map(|r| (format!("ratio:{}", r.method), r.wall_time_s / fastest))
        .collect();
    report.extras.extend(ratios);
    let m = n / cfg.k;
    for &algo in algorithms {
        let entries = match algo {
            TimingAlgorithm::FastKlrMom => cfg.k * m * m,
            TimingAlgorithm::KlrMomFull => n * n,
            _ => continue,
        };
        report
            .extras
            .insert(format!("kernel_entries:{}", algo.name()), entries as f64);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_algorithm() {
        let cfg = TimingConfig {
            iterations: 50,
            n_test: 100,
            ..TimingConfig::default()
        };
        let report = run_timing_probe(&[TimingAlgorithm::MomLogistic], 200, &cfg).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.extras["ratio:mom-logistic"], 1.0);
        assert!(run_timing_probe(&[], 200, &cfg).is_err());
        assert!(run_timing_probe(&[TimingAlgorithm::MomLogistic], 10, &cfg).is_err());
    }

    #[test]
    fn kernel_storage() {
        let cfg = TimingConfig {
            kernel_iterations: 3,
            n_test: 50,
            ..TimingConfig::default()
        };
        let report = run_timing_probe(
            &[TimingAlgorithm::FastKlrMom, TimingAlgorithm::KlrMomFull],
            410,
            &cfg,
        )
        .unwrap();
        assert_eq!(
            report.extras["kernel_entries:fast-klr-mom"],
            (20 * 20 * 20) as f64
        );
        assert_eq!(
            report.extras["kernel_entries:klr-mom-full"],
            (410 * 410) as f64
        );
        assert!(report.records.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn names_round_trip() {
        for a in TimingAlgorithm::ALL {
            assert_eq!(a.name().parse::<TimingAlgorithm>().unwrap(), a);
        }
        assert!("svm".parse::<TimingAlgorithm>().is_err());
    }
}
