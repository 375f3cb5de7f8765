use std::io::BufReader;

use mom_core::bench::{accuracy, run_robustness_experiment, ExperimentReport, RobustnessConfig};
use mom_core::data::{generate_toy, load_csv, write_csv, LabelColumn};
use mom_core::losses::LossKind;
use mom_core::model::{Classifier, KernelSpec, SavedModel};
use mom_core::optim::{
    fast_klr_mom_train, jittered_start, mom_gd_train, FastKlrConfig, MomGdConfig, TrainTrace,
};
use mom_core::outlier::{detection_metrics, flag_outliers, selection_counts};
use mom_core::rng::RngSeed;

#[test]
fn csv_train_trace_outliers() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("toy.csv");
    let ds = generate_toy(300, 15, RngSeed(21)).unwrap();
    write_csv(&ds, std::fs::File::create(&csv_path).unwrap()).unwrap();
    let loaded = load_csv(&csv_path, &LabelColumn::Last).unwrap();
    assert_eq!(loaded, ds);

    let cfg = MomGdConfig {
        record_selections: true,
        ..MomGdConfig::new(61, 1500, LossKind::Logistic, RngSeed(22))
    };
    let (model, trace) = mom_gd_train(loaded.view(), &jittered_start(2, cfg.seed), &cfg).unwrap();

    let trace_path = dir.path().join("trace.jsonl");
    trace
        .write_jsonl(std::fs::File::create(&trace_path).unwrap())
        .unwrap();
    let reread =
        TrainTrace::read_jsonl(BufReader::new(std::fs::File::open(&trace_path).unwrap())).unwrap();
    assert_eq!(reread.selections, trace.selections);

    let sc = selection_counts(&reread, loaded.len()).unwrap();
    assert_eq!(sc.total(), 1500 * (315 / 61) as u64);
    let flagged = flag_outliers(&sc, 1);
    let (_, recall) = detection_metrics(&flagged, &loaded).unwrap();
    assert!(recall >= 0.9, "recall {recall}");

    let model_path = dir.path().join("m.json");
    SavedModel::Linear(model.clone()).save(&model_path).unwrap();
    let SavedModel::Linear(back) = SavedModel::load(&model_path).unwrap() else {
        panic!("expected a linear model");
    };
    assert_eq!(back, model);
    let test = generate_toy(400, 0, RngSeed(23)).unwrap();
    assert!(accuracy(&back, &test).unwrap() > 0.85);
}

#[test]
fn kernel_model_round_trip() {
    let ds = mom_core::data::generate_moons(240, 0.2, RngSeed(2)).unwrap();
    let cfg = FastKlrConfig {
        k: 4,
        iterations: 15,
        kernel: KernelSpec::rbf(2.0).unwrap(),
        seed: RngSeed(3),
        ..FastKlrConfig::default()
    };
    let (model, _) = fast_klr_mom_train(ds.view(), &cfg).unwrap();
    let saved = SavedModel::Kernel(model);
    let back = SavedModel::from_json(&saved.to_json().unwrap()).unwrap();
    for i in 0..ds.len() {
        assert_eq!(
            saved.score(ds.features(i)).unwrap(),
            back.score(ds.features(i)).unwrap()
        );
    }
    assert!(accuracy(&back, &ds).unwrap() > 0.8);
}

#[test]
fn report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RobustnessConfig {
        n_inliers: 80,
        n_outliers: 4,
        n_test: 60,
        k: 9,
        iterations: 60,
        seed: RngSeed(8),
        ..RobustnessConfig::default()
    };
    let report = run_robustness_experiment(3, &cfg).unwrap();
    let stem = dir.path().join("robust");
    report.save(&stem).unwrap();
    let json = std::fs::read_to_string(dir.path().join("robust.json")).unwrap();
    let back = ExperimentReport::from_json(&json).unwrap();
    assert!(back.same_outcomes(&report));
    let csv = std::fs::read_to_string(dir.path().join("robust.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
}
