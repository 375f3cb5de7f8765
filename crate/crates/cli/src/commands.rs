use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mom_core::bench::{
    run_k_sweep, run_rate_experiment, run_robustness_experiment, run_timing_probe,
    ExperimentReport, KSweepConfig, RateConfig, RateDataset, RobustnessConfig, TimingAlgorithm,
    TimingConfig,
};
use mom_core::data::{
    generate_gaussians, generate_moons, generate_toy, load_csv, write_csv, Dataset, LabelColumn,
};
use mom_core::losses::LossKind;
use mom_core::model::{median_heuristic_gamma, Classifier, KernelSpec, LinearModel, SavedModel};
use mom_core::optim::{
    erm_gd_train, fast_klr_mom_train, jittered_start, klr_mom_full_train, mom_gd_train,
    FastKlrConfig, GradientForm, MomGdConfig, Repartition, StepSchedule, TrainTrace,
};
use mom_core::outlier::{detection_metrics, flag_outliers, selection_counts};
use mom_core::rng::RngSeed;

use crate::{
    Algo, CliError, DataKind, GenerateArgs, Globals, Gradient, KSweepArgs, Kernel, OutlierArgs,
    PredictArgs, RateKind, RatesArgs, RobustnessArgs, TimingArgs, TrainArgs,
};

type Result<T> = std::result::Result<T, CliError>;

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config)")))
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// The given file, or stdout when there is none.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn label_column(arg: Option<&str>) -> LabelColumn {
    arg.map(|s| s.parse().expect("label column parsing is infallible"))
        .unwrap_or_default()
}

fn gradient_form(g: Option<Gradient>, default: GradientForm) -> GradientForm {
    match g {
        Some(Gradient::Sum) => GradientForm::Sum,
        Some(Gradient::Mean) => GradientForm::Mean,
        None => default,
    }
}

fn inverse_t(eta0: Option<f64>, default: f64) -> StepSchedule {
    StepSchedule::InverseT {
        eta0: eta0.unwrap_or(default),
    }
}

pub fn generate(g: &Globals, a: GenerateArgs) -> Result<()> {
    let seed = RngSeed(g.seed);
    let ds = match a.kind.unwrap_or(DataKind::Toy) {
        DataKind::Toy => generate_toy(a.inliers.unwrap_or(600), a.outliers.unwrap_or(30), seed)?,
        DataKind::Moons => generate_moons(a.n.unwrap_or(1000), a.noise.unwrap_or(0.3), seed)?,
        DataKind::Gaussians => generate_gaussians(a.n.unwrap_or(1000), seed)?,
    };
    write_csv(&ds, sink(g.output.as_deref())?)?;
    if let Some(p) = &g.output {
        eprintln!("wrote {} samples to {}", ds.len(), p.display());
    }
    Ok(())
}

fn kernel_spec(a: &TrainArgs, ds: &Dataset) -> Result<KernelSpec> {
    match a.kernel.unwrap_or(Kernel::Rbf) {
        Kernel::Linear => {
            if a.gamma.is_some() || a.gamma_median {
                return Err(CliError::Usage(
                    "--gamma and --gamma-median need --kernel rbf".into(),
                ));
            }
            Ok(KernelSpec::Linear)
        }
        Kernel::Rbf => {
            let gamma = match a.gamma {
                Some(g) => g,
                None if a.gamma_median => median_heuristic_gamma(ds.view(), 1000)?,
                None => 1.0 / ds.dim() as f64,
            };
            Ok(KernelSpec::rbf(gamma)?)
        }
    }
}

pub fn train(g: &Globals, a: TrainArgs) -> Result<()> {
    let data = required(a.data.clone(), "data")?;
    let model_path: PathBuf = a
        .model
        .clone()
        .or_else(|| g.output.clone())
        .ok_or_else(|| {
            CliError::Usage("missing --model (or --output) for the trained model".into())
        })?;
    let algo = a.algo.unwrap_or(Algo::MomLogistic);
    let kernel_algo = matches!(algo, Algo::FastKlrMom | Algo::KlrMomFull);
    if algo == Algo::ErmLogistic && (a.trace.is_some() || a.k.is_some()) {
        return Err(CliError::Usage(
            "erm-logistic takes neither --k nor --trace".into(),
        ));
    }
    if !kernel_algo
        && (a.kernel.is_some() || a.gamma.is_some() || a.gamma_median || a.beta.is_some())
    {
        return Err(CliError::Usage(
            "kernel options apply to fast-klr-mom and klr-mom-full only".into(),
        ));
    }
    if kernel_algo && (a.gradient.is_some() || a.fixed_partition) {
        return Err(CliError::Usage(
            "--gradient and --fixed-partition apply to linear MOM engines only".into(),
        ));
    }
    let ds = load_csv(&data, &label_column(a.label_col.as_deref()))?;
    let seed = RngSeed(g.seed);
    let k = a.k.unwrap_or(10);

    let (saved, trace): (SavedModel, Option<TrainTrace>) = match algo {
        Algo::MomLogistic | Algo::MomHinge => {
            let loss = if algo == Algo::MomLogistic {
                LossKind::Logistic
            } else {
                LossKind::Hinge
            };
            let cfg = MomGdConfig {
                schedule: inverse_t(a.eta0, 0.5),
                gradient: gradient_form(a.gradient, GradientForm::Sum),
                repartition: if a.fixed_partition {
                    Repartition::Fixed
                } else {
                    Repartition::EveryStep
                },
                record_selections: a.trace.is_some(),
                ..MomGdConfig::new(k, a.t.unwrap_or(2000), loss, seed)
            };
            let (model, trace) = mom_gd_train(ds.view(), &jittered_start(ds.dim(), seed), &cfg)?;
            (SavedModel::Linear(model), Some(trace))
        }
        Algo::ErmLogistic => {
            let model = erm_gd_train(
                ds.view(),
                &LinearModel::zeros(ds.dim()),
                a.t.unwrap_or(2000),
                inverse_t(a.eta0, 0.5),
                LossKind::Logistic,
            )?;
            (SavedModel::Linear(model), None)
        }
        Algo::FastKlrMom | Algo::KlrMomFull => {
            let cfg = FastKlrConfig {
                k,
                iterations: a.t.unwrap_or(100),
                schedule: inverse_t(a.eta0, 1.0),
                beta: a.beta.unwrap_or(1e-3),
                kernel: kernel_spec(&a, &ds)?,
                seed,
                record_selections: a.trace.is_some(),
            };
            let (model, trace) = if algo == Algo::FastKlrMom {
                fast_klr_mom_train(ds.view(), &cfg)?
            } else {
                klr_mom_full_train(ds.view(), &cfg)?
            };
            (SavedModel::Kernel(model), Some(trace))
        }
    };
    saved.save(&model_path)?;
    if let (Some(path), Some(trace)) = (&a.trace, &trace) {
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = BufWriter::new(file);
        trace.write_jsonl(&mut w)?;
        w.flush().map_err(|e| io_error(path, e))?;
    }
    let train_acc = mom_core::bench::accuracy(&saved, &ds)?;
    println!("algo {:?}", algo);
    println!("samples {}", ds.len());
    println!("training accuracy {train_acc:.4}");
    if let Some(t) = &trace {
        println!("final objective {:.6}", t.final_objective);
        if let Some(stats) = t.kernel_evals {
            println!(
                "kernel evaluations {} ({} cross-block)",
                stats.total, stats.cross_block
            );
        }
    }
    println!("model written to {}", model_path.display());
    Ok(())
}

pub fn predict(g: &Globals, a: PredictArgs) -> Result<()> {
    let model = SavedModel::load(required(a.model, "model")?)?;
    let ds = load_csv(
        required(a.data, "data")?,
        &label_column(a.label_col.as_deref()),
    )?;
    let mut w = sink(g.output.as_deref())?;
    let mut correct = 0usize;
    writeln!(w, "index,score,predicted,label").map_err(|e| CliError::Runtime(e.to_string()))?;
    for i in 0..ds.len() {
        let score = model.score(ds.features(i))?;
        let pred = mom_core::data::Label::from_score(score);
        correct += usize::from(pred == ds.label(i));
        writeln!(w, "{i},{score:?},{pred},{}", ds.label(i))
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    eprintln!(
        "accuracy {:.4} on {} samples",
        correct as f64 / ds.len() as f64,
        ds.len()
    );
    Ok(())
}

pub fn outlier_scores(g: &Globals, a: OutlierArgs) -> Result<()> {
    let trace_path = required(a.trace, "trace")?;
    let file = File::open(&trace_path).map_err(|e| io_error(&trace_path, e))?;
    let trace = TrainTrace::read_jsonl(BufReader::new(file))?;
    let ds = match &a.data {
        Some(p) => Some(load_csv(p, &LabelColumn::Last)?),
        None => None,
    };
    let n = match (a.n, &ds) {
        (Some(n), Some(ds)) if n != ds.len() => {
            return Err(CliError::Usage(format!(
                "--n {n} disagrees with the {} rows of --data",
                ds.len()
            )))
        }
        (Some(n), _) => n,
        (None, Some(ds)) => ds.len(),
        (None, None) => return Err(CliError::Usage("missing --n (or --data)".into())),
    };
    let sc = selection_counts(&trace, n)?;
    let flags = ds.as_ref().and_then(|d| d.outlier_flags());
    sc.write_csv(sink(g.output.as_deref())?, flags)?;
    let flagged = flag_outliers(&sc, a.threshold.unwrap_or(1));
    eprintln!(
        "{} of {n} samples flagged over {} steps",
        flagged.len(),
        sc.iterations
    );
    if let Some(ds) = ds.as_ref().filter(|d| d.outlier_flags().is_some()) {
        let (precision, recall) = detection_metrics(&flagged, ds)?;
        eprintln!("precision {precision:.4} recall {recall:.4}");
    }
    Ok(())
}

fn finish(g: &Globals, report: &ExperimentReport) -> Result<()> {
    println!("{} (seed {})", report.name, report.master_seed);
    println!("method\tsetting\tcount\tfailures\tmean\tmedian\tq1\tq3");
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for s in &report.summaries {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.method,
            s.setting,
            s.count,
            s.failures,
            fmt(s.mean),
            fmt(s.median),
            fmt(s.q1),
            fmt(s.q3)
        );
    }
    if let Some(fit) = &report.slope_fit {
        println!(
            "log-log slope {:.4} intercept {:.4} R2 {:.4}",
            fit.slope, fit.intercept, fit.r2
        );
    }
    for (k, v) in &report.extras {
        println!("{k}\t{v:.4}");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(stem) = &g.output {
        report.save(stem)?;
        eprintln!("wrote {0}.json and {0}.csv", stem.display());
    }
    Ok(())
}

pub fn bench_robustness(g: &Globals, a: RobustnessArgs) -> Result<()> {
    let d = RobustnessConfig::default();
    let cfg = RobustnessConfig {
        n_inliers: a.inliers.unwrap_or(d.n_inliers),
        n_outliers: a.outliers.unwrap_or(d.n_outliers),
        n_test: a.n_test.unwrap_or(d.n_test),
        k: a.k.unwrap_or(d.k),
        iterations: a.t.unwrap_or(d.iterations),
        schedule: a
            .eta0
            .map_or(d.schedule, |eta0| StepSchedule::InverseT { eta0 }),
        gradient: gradient_form(a.gradient, d.gradient),
        erm_schedule: a
            .erm_eta0
            .map_or(d.erm_schedule, |eta0| StepSchedule::InverseT { eta0 }),
        seed: RngSeed(g.seed),
    };
    finish(g, &run_robustness_experiment(a.runs.unwrap_or(20), &cfg)?)
}

pub fn bench_ksweep(g: &Globals, a: KSweepArgs) -> Result<()> {
    let d = KSweepConfig::default();
    let cfg = KSweepConfig {
        n_inliers: a.inliers.unwrap_or(d.n_inliers),
        n_outliers: a.outliers.unwrap_or(d.n_outliers),
        n_test: a.n_test.unwrap_or(d.n_test),
        iterations: a.t.unwrap_or(d.iterations),
        schedule: a
            .eta0
            .map_or(d.schedule, |eta0| StepSchedule::InverseT { eta0 }),
        gradient: gradient_form(a.gradient, d.gradient),
        seed: RngSeed(g.seed),
    };
    let ks = a.ks.unwrap_or_else(|| vec![1, 10, 30, 60, 90, 120, 200]);
    finish(g, &run_k_sweep(&ks, a.runs.unwrap_or(20), &cfg)?)
}

pub fn bench_rates(g: &Globals, a: RatesArgs) -> Result<()> {
    let d = RateConfig::default();
    let cfg = RateConfig {
        k: a.k.unwrap_or(d.k),
        iterations: a.t.unwrap_or(d.iterations),
        schedule: a
            .eta0
            .map_or(d.schedule, |eta0| StepSchedule::InverseT { eta0 }),
        gradient: gradient_form(a.gradient, d.gradient),
        n_test: a.n_test.unwrap_or(d.n_test),
        reference_factor: a.reference_factor.unwrap_or(d.reference_factor),
        moons_noise: a.noise.unwrap_or(d.moons_noise),
        seed: RngSeed(g.seed),
    };
    let kind = match a.dataset.unwrap_or(RateKind::Gaussians) {
        RateKind::Moons => RateDataset::Moons,
        RateKind::Gaussians => RateDataset::Gaussians,
    };
    let ns =
        a.ns.unwrap_or_else(|| vec![250, 500, 1000, 2000, 4000, 8000]);
    finish(
        g,
        &run_rate_experiment(kind, &ns, a.runs.unwrap_or(20), &cfg)?,
    )
}

pub fn bench_timing(g: &Globals, a: TimingArgs) -> Result<()> {
    let d = TimingConfig::default();
    let cfg = TimingConfig {
        k: a.k.unwrap_or(d.k),
        iterations: a.t.unwrap_or(d.iterations),
        kernel_iterations: a.kernel_t.unwrap_or(d.kernel_iterations),
        kernel: match a.gamma {
            Some(gamma) => KernelSpec::rbf(gamma)?,
            None => d.kernel,
        },
        beta: a.beta.unwrap_or(d.beta),
        n_test: a.n_test.unwrap_or(d.n_test),
        seed: RngSeed(g.seed),
    };
    let algos: Vec<TimingAlgorithm> = match a.algos {
        None => TimingAlgorithm::ALL.to_vec(),
        Some(list) => list
            .into_iter()
            .map(|x| match x {
                Algo::MomLogistic => TimingAlgorithm::MomLogistic,
                Algo::MomHinge => TimingAlgorithm::MomHinge,
                Algo::ErmLogistic => TimingAlgorithm::ErmLogistic,
                Algo::FastKlrMom => TimingAlgorithm::FastKlrMom,
                Algo::KlrMomFull => TimingAlgorithm::KlrMomFull,
            })
            .collect(),
    };
    finish(g, &run_timing_probe(&algos, a.n.unwrap_or(4000), &cfg)?)
}
