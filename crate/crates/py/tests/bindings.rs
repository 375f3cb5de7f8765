use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &std::ffi::CStr) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(mom_py::mom_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("mom_py", module).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn train_and_score_toy() {
    run(c"
ds = mom_py.Dataset.toy(200, 10, seed=3)
assert len(ds) == 210 and ds.dim == 2
test = mom_py.Dataset.toy(300, 0, seed=4)
model, trace = mom_py.mom_gd_train(ds, 41, iterations=500, seed=5, record_selections=True)
assert model.accuracy(test) > 0.8, model.accuracy(test)
steps = trace.selections()
assert len(steps) == 500 and all(len(m) == 5 for (_, _, m, _) in steps)
counts = mom_py.selection_counts(trace, len(ds))
assert sum(counts) == 500 * 5
flagged = mom_py.flag_outliers(counts, 1)
truth = [i for i, f in enumerate(ds.outlier_flags()) if f]
assert set(truth) <= set(flagged)
again = mom_py.LinearModel.from_json(model.to_json())
assert again.weights == model.weights and again.intercept == model.intercept
");
}

#[test]
fn estimator_and_errors() {
    run(c"
assert mom_py.mom_estimate([1.0, 2.0, 3.0, 4.0], 1) == 2.5
assert mom_py.mom_estimate([5.0, 1.0, 9.0], 3) == 5.0
for bad in (lambda: mom_py.mom_estimate([1.0], 3),
            lambda: mom_py.Dataset([[0.0], [1.0, 2.0]], [1, -1]),
            lambda: mom_py.Dataset([[0.0]], [7])):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError('expected ValueError')
try:
    mom_py.Dataset.load_csv('/nonexistent/file.csv')
except OSError:
    pass
else:
    raise AssertionError('expected OSError')
");
}

#[test]
fn kernel_engine() {
    run(c"
ds = mom_py.Dataset.gaussians(400, seed=1)
model, trace = mom_py.fast_klr_mom_train(ds, 4, iterations=10, gamma=0.5, seed=2)
total, cross = trace.kernel_evals()
assert cross == 0 and total == 4 * 100 * 101 // 2
assert 0.6 < model.accuracy(mom_py.Dataset.gaussians(500, seed=9)) <= 1.0
assert len(model.alpha()) == 400
");
}

#[test]
fn experiment_reports_are_json() {
    run(c"
import json
report = json.loads(mom_py.run_k_sweep([1, 5], n_runs=2, iterations=50, seed=1))
assert report['name'] == 'k-sweep' and len(report['records']) == 4
");
}
