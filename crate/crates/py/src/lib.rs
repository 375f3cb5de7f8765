//! Python bindings: the `mom_py` extension module.
//!
//! Datasets and models are immutable Python objects wrapping the Rust
//! values. Training releases the GIL. Experiment reports come back as JSON
//! text, ready for `json.loads`.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mom_core::bench::{
    run_k_sweep as core_k_sweep, run_robustness_experiment as core_robustness, KSweepConfig,
    RobustnessConfig,
};
use mom_core::data::{self, Label, LabelColumn, Partition};
use mom_core::losses::LossKind;
use mom_core::model::{self, Classifier, KernelSpec, SavedModel};
use mom_core::optim::{self, FastKlrConfig, GradientForm, MomGdConfig, StepSchedule};
use mom_core::rng::RngSeed;
use mom_core::MomError;

fn to_py(e: MomError) -> PyErr {
    match e {
        MomError::Io { .. } => PyOSError::new_err(e.to_string()),
        MomError::Numeric(_) | MomError::Unsupported(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn label_of(v: i64) -> PyResult<Label> {
    match v {
        1 => Ok(Label::Positive),
        -1 | 0 => Ok(Label::Negative),
        _ => Err(PyValueError::new_err(format!(
            "label must be -1, 0 or 1, got {v}"
        ))),
    }
}

fn label_value(l: Label) -> i64 {
    l.sign() as i64
}

fn parse_loss(s: &str) -> PyResult<LossKind> {
    match s {
        "logistic" => Ok(LossKind::Logistic),
        "hinge" => Ok(LossKind::Hinge),
        other => Err(PyValueError::new_err(format!("unknown loss {other:?}"))),
    }
}

fn parse_gradient(s: &str) -> PyResult<GradientForm> {
    match s {
        "sum" => Ok(GradientForm::Sum),
        "mean" => Ok(GradientForm::Mean),
        other => Err(PyValueError::new_err(format!(
            "unknown gradient form {other:?}"
        ))),
    }
}

/// Labelled samples with optional ground-truth outlier flags.
#[pyclass(name = "Dataset", module = "mom_py", frozen)]
pub struct PyDataset {
    pub inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    /// `features` is a list of rows; labels are -1/+1 (0 reads as -1).
    #[new]
    #[pyo3(signature = (features, labels, is_outlier=None))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<i64>,
        is_outlier: Option<Vec<bool>>,
    ) -> PyResult<Self> {
        let dim = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != dim) {
            return Err(PyValueError::new_err("feature rows have different lengths"));
        }
        let labels = labels
            .into_iter()
            .map(label_of)
            .collect::<PyResult<Vec<_>>>()?;
        let flat = features.into_iter().flatten().collect();
        let inner =
            data::Dataset::with_outlier_flags(dim, flat, labels, is_outlier).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (n_inliers=600, n_outliers=30, seed=0))]
    fn toy(n_inliers: usize, n_outliers: usize, seed: u64) -> PyResult<Self> {
        let inner = data::generate_toy(n_inliers, n_outliers, RngSeed(seed)).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (n, noise=0.3, seed=0))]
    fn moons(n: usize, noise: f64, seed: u64) -> PyResult<Self> {
        let inner = data::generate_moons(n, noise, RngSeed(seed)).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed=0))]
    fn gaussians(n: usize, seed: u64) -> PyResult<Self> {
        let inner = data::generate_gaussians(n, RngSeed(seed)).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    /// Reads a CSV; `label_col` is "last", a column index or a header name.
    #[staticmethod]
    #[pyo3(signature = (path, label_col="last"))]
    fn load_csv(path: &str, label_col: &str) -> PyResult<Self> {
        let col: LabelColumn = label_col.parse().expect("infallible");
        let inner = data::load_csv(path, &col).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    fn save_csv(&self, path: &str) -> PyResult<()> {
        let file =
            std::fs::File::create(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        data::write_csv(&self.inner, std::io::BufWriter::new(file)).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len())
            .map(|i| self.inner.features(i).to_vec())
            .collect()
    }

    fn labels(&self) -> Vec<i64> {
        self.inner
            .labels()
            .iter()
            .map(|&l| label_value(l))
            .collect()
    }

    fn outlier_flags(&self) -> Option<Vec<bool>> {
        self.inner.outlier_flags().map(<[bool]>::to_vec)
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, dim={})", self.inner.len(), self.inner.dim())
    }
}

/// Median-block selections of a training run.
#[pyclass(name = "Trace", module = "mom_py", frozen)]
pub struct PyTrace {
    pub inner: optim::TrainTrace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn final_objective(&self) -> f64 {
        self.inner.final_objective
    }

    /// `(t, k_med, members, objective)` per step; empty unless recorded.
    fn selections(&self) -> Vec<(usize, usize, Vec<usize>, f64)> {
        self.inner
            .selections
            .iter()
            .flatten()
            .map(|r| (r.t, r.k_med, r.members.clone(), r.objective))
            .collect()
    }

    /// `(total, cross_block)` kernel evaluations of the kernel engines.
    fn kernel_evals(&self) -> Option<(u64, u64)> {
        self.inner.kernel_evals.map(|s| (s.total, s.cross_block))
    }

    fn save_jsonl(&self, path: &str) -> PyResult<()> {
        let file =
            std::fs::File::create(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        self.inner
            .write_jsonl(std::io::BufWriter::new(file))
            .map_err(to_py)
    }

    #[staticmethod]
    fn load_jsonl(path: &str) -> PyResult<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        let inner = optim::TrainTrace::read_jsonl(std::io::BufReader::new(file)).map_err(to_py)?;
        Ok(PyTrace { inner })
    }
}

/// `sign(<u, x> + b)` classifier.
#[pyclass(name = "LinearModel", module = "mom_py", frozen)]
pub struct PyLinearModel {
    pub inner: model::LinearModel,
}

/// Kernel expansion over the training points.
#[pyclass(name = "KernelModel", module = "mom_py", frozen)]
pub struct PyKernelModel {
    pub inner: model::KernelModel,
}

fn scores(m: &impl Classifier, ds: &data::Dataset) -> PyResult<Vec<f64>> {
    (0..ds.len())
        .map(|i| m.score(ds.features(i)).map_err(to_py))
        .collect()
}

#[pymethods]
impl PyLinearModel {
    #[new]
    fn new(weights: Vec<f64>, intercept: f64) -> Self {
        PyLinearModel {
            inner: model::LinearModel::new(weights, intercept),
        }
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.inner.intercept
    }

    fn score(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.score(&x).map_err(to_py)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<i64> {
        self.inner.predict(&x).map(label_value).map_err(to_py)
    }

    fn scores(&self, dataset: &Bound<'_, PyDataset>) -> PyResult<Vec<f64>> {
        scores(&self.inner, &dataset.get().inner)
    }

    fn accuracy(&self, dataset: &Bound<'_, PyDataset>) -> PyResult<f64> {
        mom_core::bench::accuracy(&self.inner, &dataset.get().inner).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        SavedModel::Linear(self.inner.clone())
            .to_json()
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match SavedModel::from_json(text).map_err(to_py)? {
            SavedModel::Linear(inner) => Ok(PyLinearModel { inner }),
            SavedModel::Kernel(_) => Err(PyValueError::new_err("JSON holds a kernel model")),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "LinearModel(weights={:?}, intercept={})",
            self.inner.weights, self.inner.intercept
        )
    }
}

#[pymethods]
impl PyKernelModel {
    fn score(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.score(&x).map_err(to_py)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<i64> {
        self.inner.predict(&x).map(label_value).map_err(to_py)
    }

    fn scores(&self, dataset: &Bound<'_, PyDataset>) -> PyResult<Vec<f64>> {
        scores(&self.inner, &dataset.get().inner)
    }

    fn accuracy(&self, dataset: &Bound<'_, PyDataset>) -> PyResult<f64> {
        mom_core::bench::accuracy(&self.inner, &dataset.get().inner).map_err(to_py)
    }

    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha().to_vec()
    }

    fn to_json(&self) -> PyResult<String> {
        SavedModel::Kernel(self.inner.clone())
            .to_json()
            .map_err(to_py)
    }
}

/// MOM estimate of `values` over a uniform partition into `k` blocks.
#[pyfunction]
#[pyo3(signature = (values, k, seed=0))]
fn mom_estimate(values: Vec<f64>, k: usize, seed: u64) -> PyResult<f64> {
    let partition = Partition::random(values.len(), k, &mut RngSeed(seed).rng()).map_err(to_py)?;
    mom_core::mom::mom_estimate(&values, &partition).map_err(to_py)
}

/// MOM gradient descent from a tiny seeded random start.
#[pyfunction]
#[pyo3(signature = (dataset, k, iterations=2000, loss="logistic", eta0=0.5, gradient="sum", seed=0, record_selections=false))]
#[allow(clippy::too_many_arguments)]
fn mom_gd_train(
    py: Python<'_>,
    dataset: &Bound<'_, PyDataset>,
    k: usize,
    iterations: usize,
    loss: &str,
    eta0: f64,
    gradient: &str,
    seed: u64,
    record_selections: bool,
) -> PyResult<(PyLinearModel, PyTrace)> {
    let ds = &dataset.get().inner;
    let cfg = MomGdConfig {
        schedule: StepSchedule::InverseT { eta0 },
        gradient: parse_gradient(gradient)?,
        record_selections,
        ..MomGdConfig::new(k, iterations, parse_loss(loss)?, RngSeed(seed))
    };
    let start = optim::jittered_start(ds.dim(), cfg.seed);
    let (inner, trace) = py
        .detach(|| optim::mom_gd_train(ds.view(), &start, &cfg))
        .map_err(to_py)?;
    Ok((PyLinearModel { inner }, PyTrace { inner: trace }))
}

/// Full-batch gradient descent on the mean loss from zero.
#[pyfunction]
#[pyo3(signature = (dataset, iterations=2000, loss="logistic", eta0=0.5))]
fn erm_gd_train(
    py: Python<'_>,
    dataset: &Bound<'_, PyDataset>,
    iterations: usize,
    loss: &str,
    eta0: f64,
) -> PyResult<PyLinearModel> {
    let ds = &dataset.get().inner;
    let loss = parse_loss(loss)?;
    let zeros = model::LinearModel::zeros(ds.dim());
    let inner = py
        .detach(|| {
            optim::erm_gd_train(
                ds.view(),
                &zeros,
                iterations,
                StepSchedule::InverseT { eta0 },
                loss,
            )
        })
        .map_err(to_py)?;
    Ok(PyLinearModel { inner })
}

/// Fast KLR MOM; `gamma=None` uses the linear kernel.
#[pyfunction]
#[pyo3(signature = (dataset, k, iterations=100, gamma=None, beta=1e-3, eta0=1.0, seed=0, full=false))]
#[allow(clippy::too_many_arguments)]
fn fast_klr_mom_train(
    py: Python<'_>,
    dataset: &Bound<'_, PyDataset>,
    k: usize,
    iterations: usize,
    gamma: Option<f64>,
    beta: f64,
    eta0: f64,
    seed: u64,
    full: bool,
) -> PyResult<(PyKernelModel, PyTrace)> {
    let ds = &dataset.get().inner;
    let kernel = match gamma {
        Some(g) => KernelSpec::rbf(g).map_err(to_py)?,
        None => KernelSpec::Linear,
    };
    let cfg = FastKlrConfig {
        k,
        iterations,
        schedule: StepSchedule::InverseT { eta0 },
        beta,
        kernel,
        seed: RngSeed(seed),
        record_selections: true,
    };
    let (inner, trace) = py
        .detach(|| {
            if full {
                optim::klr_mom_full_train(ds.view(), &cfg)
            } else {
                optim::fast_klr_mom_train(ds.view(), &cfg)
            }
        })
        .map_err(to_py)?;
    Ok((PyKernelModel { inner }, PyTrace { inner: trace }))
}

/// Per-sample median-block counts of a recorded trace over `n` samples.
#[pyfunction]
fn selection_counts(trace: &Bound<'_, PyTrace>, n: usize) -> PyResult<Vec<u64>> {
    Ok(mom_core::outlier::selection_counts(&trace.get().inner, n)
        .map_err(to_py)?
        .counts)
}

/// Indices whose count is below `threshold`.
#[pyfunction]
#[pyo3(signature = (counts, threshold=1))]
fn flag_outliers(counts: Vec<u64>, threshold: u64) -> Vec<usize> {
    let sc = mom_core::outlier::SelectionCounts {
        counts,
        iterations: 0,
        block_size: 0,
    };
    mom_core::outlier::flag_outliers(&sc, threshold)
}

/// Robustness comparison on the corrupted toy data, as report JSON.
#[pyfunction]
#[pyo3(signature = (n_runs=20, k=120, iterations=2000, n_outliers=30, seed=0))]
fn run_robustness_experiment(
    py: Python<'_>,
    n_runs: usize,
    k: usize,
    iterations: usize,
    n_outliers: usize,
    seed: u64,
) -> PyResult<String> {
    let cfg = RobustnessConfig {
        k,
        iterations,
        n_outliers,
        seed: RngSeed(seed),
        ..RobustnessConfig::default()
    };
    let report = py.detach(|| core_robustness(n_runs, &cfg)).map_err(to_py)?;
    report.to_json().map_err(to_py)
}

/// MOM accuracy across block counts, as report JSON.
#[pyfunction]
#[pyo3(signature = (ks, n_runs=20, iterations=2000, n_outliers=30, seed=0))]
fn run_k_sweep(
    py: Python<'_>,
    ks: Vec<usize>,
    n_runs: usize,
    iterations: usize,
    n_outliers: usize,
    seed: u64,
) -> PyResult<String> {
    let cfg = KSweepConfig {
        iterations,
        n_outliers,
        seed: RngSeed(seed),
        ..KSweepConfig::default()
    };
    let report = py
        .detach(|| core_k_sweep(&ks, n_runs, &cfg))
        .map_err(to_py)?;
    report.to_json().map_err(to_py)
}

#[pymodule]
pub fn mom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyLinearModel>()?;
    m.add_class::<PyKernelModel>()?;
    m.add_function(wrap_pyfunction!(mom_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(mom_gd_train, m)?)?;
    m.add_function(wrap_pyfunction!(erm_gd_train, m)?)?;
    m.add_function(wrap_pyfunction!(fast_klr_mom_train, m)?)?;
    m.add_function(wrap_pyfunction!(selection_counts, m)?)?;
    m.add_function(wrap_pyfunction!(flag_outliers, m)?)?;
    m.add_function(wrap_pyfunction!(run_robustness_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_k_sweep, m)?)?;
    Ok(())
}
