use std::path::Path;
use std::process::{Command, Output};

fn mom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_train_predict_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    let model = dir.path().join("m.json");
    let trace = dir.path().join("trace.jsonl");
    let scores = dir.path().join("scores.csv");
    let preds = dir.path().join("pred.csv");

    let o = mom(&[
        "generate",
        "--kind",
        "toy",
        "--inliers",
        "600",
        "--outliers",
        "30",
        "--seed",
        "7",
        "--output",
        p(&data),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 631);
    assert!(text.starts_with("x0,x1,label,is_outlier"));

    let o = mom(&[
        "train",
        "--algo",
        "mom-logistic",
        "--k",
        "120",
        "--t",
        "2000",
        "--data",
        p(&data),
        "--model",
        p(&model),
        "--trace",
        p(&trace),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&trace).unwrap().lines().count(),
        2000
    );

    let o = mom(&[
        "outlier-scores",
        "--trace",
        p(&trace),
        "--n",
        "630",
        "--threshold",
        "1",
        "--output",
        p(&scores),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&scores).unwrap();
    assert_eq!(text.lines().next(), Some("index,count"));
    assert_eq!(text.lines().count(), 631);

    let o = mom(&["outlier-scores", "--trace", p(&trace), "--data", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("index,count,is_outlier"));
    assert!(stderr(&o).contains("precision"));

    let o = mom(&[
        "predict",
        "--model",
        p(&model),
        "--data",
        p(&data),
        "--output",
        p(&preds),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&preds).unwrap().lines().count(),
        631
    );
    assert!(stderr(&o).contains("accuracy"));
}

#[test]
fn seeded_runs_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("g.csv");
    assert!(mom(&[
        "generate",
        "--kind",
        "gaussians",
        "--n",
        "300",
        "--seed",
        "3",
        "--output",
        p(&data)
    ])
    .status
    .success());
    let mut models = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let o = mom(&[
            "train",
            "--k",
            "11",
            "--t",
            "300",
            "--seed",
            "9",
            "--data",
            p(&data),
            "--output",
            p(&path),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        models.push(std::fs::read_to_string(path).unwrap());
    }
    assert_eq!(models[0], models[1]);
    let other = dir.path().join("c.json");
    assert!(mom(&[
        "train",
        "--k",
        "11",
        "--t",
        "300",
        "--seed",
        "10",
        "--data",
        p(&data),
        "--output",
        p(&other)
    ])
    .status
    .success());
    assert_ne!(models[0], std::fs::read_to_string(other).unwrap());
}

#[test]
fn kernel_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("moons.csv");
    let model = dir.path().join("k.json");
    assert!(mom(&[
        "generate",
        "--kind",
        "moons",
        "--n",
        "200",
        "--output",
        p(&data)
    ])
    .status
    .success());
    let o = mom(&[
        "train",
        "--algo",
        "fast-klr-mom",
        "--k",
        "4",
        "--t",
        "10",
        "--gamma-median",
        "--data",
        p(&data),
        "--model",
        p(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("(0 cross-block)"));
    assert!(std::fs::read_to_string(&model)
        .unwrap()
        .contains("\"kernel\""));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("sweep");
    std::fs::write(
        &cfg,
        r#"{"seed": 4, "bench-ksweep": {"ks": [1, 5], "runs": 2, "inliers": 60, "outliers": 3, "n-test": 50, "t": 30}}"#,
    )
    .unwrap();
    let o = mom(&[
        "bench-ksweep",
        "--config",
        p(&cfg),
        "--ks",
        "2,3,4",
        "--output",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap())
            .unwrap();
    assert_eq!(report["master_seed"], 4);
    assert_eq!(report["records"].as_array().unwrap().len(), 6);
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn bench_commands_run_small() {
    let o = mom(&[
        "bench-robustness",
        "--runs",
        "2",
        "--inliers",
        "60",
        "--outliers",
        "3",
        "--n-test",
        "50",
        "--k",
        "9",
        "--t",
        "40",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("erm-logistic"));
    let o = mom(&[
        "bench-rates",
        "--ns",
        "50,100,200,400",
        "--runs",
        "2",
        "--t",
        "50",
        "--n-test",
        "2000",
        "--reference-factor",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("log-log slope"));
    let o = mom(&[
        "bench-timing",
        "--n",
        "200",
        "--k",
        "5",
        "--t",
        "20",
        "--kernel-t",
        "2",
        "--n-test",
        "50",
        "--algos",
        "mom-logistic,fast-klr-mom",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ratio:fast-klr-mom"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mom(&["--help"]).status.success());
    assert!(mom(&["train", "--help"]).status.success());
    assert_eq!(mom(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mom(&["generate", "--bogus"]).status.code(), Some(2));
    assert_eq!(mom(&["train", "--k", "5"]).status.code(), Some(2));
    assert_eq!(
        mom(&["generate", "--kind", "spirals"]).status.code(),
        Some(2)
    );

    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"train": {"kk": 3}}"#).unwrap();
    let o = mom(&["train", "--config", p(&bad_cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kk"));

    let o = mom(&[
        "predict",
        "--model",
        p(&dir.path().join("missing.json")),
        "--data",
        "x.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error:"));

    // K larger than N is rejected by the trainer at run time.
    let data = dir.path().join("tiny.csv");
    assert!(mom(&[
        "generate",
        "--kind",
        "gaussians",
        "--n",
        "10",
        "--output",
        p(&data)
    ])
    .status
    .success());
    let o = mom(&[
        "train",
        "--k",
        "50",
        "--data",
        p(&data),
        "--model",
        p(&dir.path().join("m.json")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
