//! Python bindings: datasets, the publishing mechanisms, utility metrics and
//! the empirical privacy check.

use aptb_core::eval::dpcheck::{empirical_dp_check, empirical_dp_check_baseline, tiny_fixture, DpCheckReport};
use aptb_core::eval::{self, BaselineOptions, QueryWorkload};
use aptb_core::{
    config_snapshot, AptbConfig, ConfigOverrides, Delta, Epsilon, Error, StPoint, Trajectory,
};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn epsilon(value: f64) -> PyResult<Epsilon> {
    Epsilon::new(value).map_err(py_err)
}

#[pyclass(name = "Universe", module = "aptb", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyUniverse(aptb_core::Universe);

#[pymethods]
impl PyUniverse {
    #[new]
    fn new(rows: u32, cols: u32, slots: u32) -> PyResult<Self> {
        aptb_core::Universe::new(rows, cols, slots).map(Self).map_err(py_err)
    }

    #[getter]
    fn rows(&self) -> u32 {
        self.0.rows()
    }

    #[getter]
    fn cols(&self) -> u32 {
        self.0.cols()
    }

    #[getter]
    fn slots(&self) -> u32 {
        self.0.slots()
    }

    #[getter]
    fn cell_count(&self) -> u32 {
        self.0.cell_count()
    }

    fn __repr__(&self) -> String {
        format!("Universe(rows={}, cols={}, slots={})", self.0.rows(), self.0.cols(), self.0.slots())
    }
}

/// A discretized trajectory dataset. Trajectories are lists of `(cell, slot)` pairs.
#[pyclass(name = "Dataset", module = "aptb", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDataset(aptb_core::Dataset);

fn points(raw: Vec<(u32, u32)>) -> Vec<StPoint> {
    raw.into_iter().map(|(cell, slot)| StPoint::new(cell, slot)).collect()
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(universe: PyUniverse, trajectories: Vec<Vec<(u32, u32)>>) -> PyResult<Self> {
        let ts = trajectories
            .into_iter()
            .map(|t| Trajectory::new(points(t)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(py_err)?;
        aptb_core::Dataset::new(universe.0, ts).map(Self).map_err(py_err)
    }

    /// Parses the text format: a `universe rows=R cols=C slots=T` header, then
    /// one trajectory per line.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        aptb_core::Dataset::parse(text).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn read(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| py_err(Error::from(e)))?;
        Self::parse(&text)
    }

    /// Synthetic dataset with popularity- and distance-weighted cells.
    #[staticmethod]
    #[pyo3(signature = (universe, n, max_len, skew = 1.0, seed = 0))]
    fn synth(universe: PyUniverse, n: usize, max_len: usize, skew: f64, seed: u64) -> PyResult<Self> {
        eval::synth_dataset(universe.0, n, max_len, skew, seed).map(Self).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn universe(&self) -> PyUniverse {
        PyUniverse(*self.0.universe())
    }

    fn trajectories(&self) -> Vec<Vec<(u32, u32)>> {
        self.0
            .trajectories()
            .iter()
            .map(|t| t.points().iter().map(|p| (p.cell, p.slot)).collect())
            .collect()
    }

    fn max_length(&self) -> usize {
        self.0.max_length()
    }

    fn prefix_count(&self, prefix: Vec<(u32, u32)>) -> u64 {
        self.0.prefix_count(&points(prefix))
    }

    fn remove_one(&self, index: usize) -> PyResult<Self> {
        if index >= self.0.len() {
            return Err(PyIndexError::new_err(format!("index {index} out of range for {} trajectories", self.0.len())));
        }
        self.0.remove_one(index).map(Self).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset({} trajectories over {})", self.0.len(), self.0.universe())
    }
}

/// Mechanism configuration. Unset options take their defaults.
#[pyclass(name = "Config", module = "aptb", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(AptbConfig);

fn parse_delta(value: &Bound<'_, PyAny>) -> PyResult<Delta> {
    if let Ok(s) = value.extract::<String>() {
        return aptb_core::config::parse_delta(&s)
            .ok_or_else(|| PyValueError::new_err(format!("delta must be 'auto' or a number, got {s:?}")));
    }
    Ok(Delta::Fixed(value.extract::<f64>()?))
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (eps, h, seed, *, pre_fraction = None, delta = None, theta = None, theta_floor = None, split = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        eps: f64,
        h: usize,
        seed: u64,
        pre_fraction: Option<f64>,
        delta: Option<&Bound<'_, PyAny>>,
        theta: Option<f64>,
        theta_floor: Option<f64>,
        split: Option<(f64, f64, f64)>,
    ) -> PyResult<Self> {
        let over = ConfigOverrides {
            eps: Some(eps),
            h: Some(h),
            seed: Some(seed),
            pre_fraction,
            delta: delta.map(parse_delta).transpose()?,
            theta,
            theta_floor,
            split_rank: split.map(|s| s.0),
            split_select: split.map(|s| s.1),
            split_count: split.map(|s| s.2),
            ..Default::default()
        };
        over.resolve().map(Self).map_err(py_err)
    }

    /// Reads `key = value` lines; `eps`, `h` and `seed` are required.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        ConfigOverrides::parse(text).and_then(|o| o.resolve()).map(Self).map_err(py_err)
    }

    fn snapshot(&self) -> String {
        config_snapshot(&self.0)
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.0.total_eps.value()
    }

    #[getter]
    fn h(&self) -> usize {
        self.0.h_user
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn __repr__(&self) -> String {
        format!("Config(eps={}, h={}, seed={})", self.0.total_eps, self.0.h_user, self.0.seed)
    }
}

#[pyclass(name = "Publication", module = "aptb", frozen)]
struct PyPublication(aptb_core::Publication);

#[pymethods]
impl PyPublication {
    #[getter]
    fn dataset(&self) -> PyDataset {
        PyDataset(self.0.dataset.clone())
    }

    /// Ledger export, one `scope<TAB>purpose<TAB>epsilon` line per charge.
    #[getter]
    fn ledger(&self) -> String {
        self.0.ledger.export()
    }

    #[getter]
    fn max_path_budget(&self) -> f64 {
        self.0.audit.max_path_sum
    }

    #[getter]
    fn noisy_tree(&self) -> String {
        self.0.noisy_tree.dump()
    }

    #[getter]
    fn consistent_tree(&self) -> String {
        self.0.consistent.tree().dump()
    }

    fn __repr__(&self) -> String {
        format!(
            "Publication({} trajectories, max path budget {:.6})",
            self.0.dataset.len(),
            self.0.audit.max_path_sum
        )
    }
}

#[pyfunction]
fn publish(dataset: &PyDataset, config: &PyConfig) -> PyResult<PyPublication> {
    aptb_core::publish(&dataset.0, &config.0).map(PyPublication).map_err(py_err)
}

/// Uniform-budget baseline with a fixed height.
#[pyfunction]
#[pyo3(signature = (dataset, eps, h, seed, theta = None))]
fn publish_baseline(dataset: &PyDataset, eps: f64, h: usize, seed: u64, theta: Option<f64>) -> PyResult<PyPublication> {
    let opts = BaselineOptions { theta_override: theta, ..Default::default() };
    aptb_core::publish_baseline(&dataset.0, epsilon(eps)?, h, &opts, seed)
        .map(PyPublication)
        .map_err(py_err)
}

/// Average relative error over the standard prefix workload up to length `h`.
#[pyfunction]
#[pyo3(signature = (original, published, h, workload_seed = 0))]
fn avg_relative_error(original: &PyDataset, published: &PyDataset, h: usize, workload_seed: u64) -> PyResult<f64> {
    let w = QueryWorkload::standard(&original.0, h, workload_seed);
    eval::avg_relative_error(&original.0, &published.0, &w).map_err(py_err)
}

#[pyfunction]
fn length_distribution_l1(original: &PyDataset, published: &PyDataset) -> PyResult<f64> {
    eval::length_distribution_l1(&original.0, &published.0).map_err(py_err)
}

fn report_dict<'py>(py: Python<'py>, r: &DpCheckReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("pass", r.pass)?;
    d.set_item("epsilon", r.epsilon_claimed.value())?;
    d.set_item("max_observed_ratio", r.max_observed_ratio)?;
    d.set_item("trials", r.trials)?;
    d.set_item("keys_checked", r.keys_checked)?;
    d.set_item("z", r.z)?;
    d.set_item("worst_key", r.worst_key.clone())?;
    d.set_item("violations", r.violations.clone())?;
    Ok(d)
}

/// Monte Carlo privacy check on a bundled neighbour pair.
#[pyfunction]
#[pyo3(signature = (fixture, eps, trials = 100_000, seed = 0, mechanism = "aptb"))]
fn dp_check<'py>(
    py: Python<'py>,
    fixture: &str,
    eps: f64,
    trials: usize,
    seed: u64,
    mechanism: &str,
) -> PyResult<Bound<'py, PyDict>> {
    if mechanism != "aptb" && mechanism != "baseline" {
        return Err(PyValueError::new_err(format!("unknown mechanism {mechanism:?}")));
    }
    let f = tiny_fixture(fixture).ok_or_else(|| PyValueError::new_err(format!("unknown fixture {fixture:?}")))?;
    let e = epsilon(eps)?;
    let h = f.dataset.universe().slots() as usize;
    let report = py
        .detach(|| match mechanism {
            "aptb" => empirical_dp_check(&f.dataset, f.removed_index, &AptbConfig::new(e, h, seed), trials),
            _ => empirical_dp_check_baseline(
                &f.dataset,
                f.removed_index,
                e,
                h,
                &BaselineOptions::default(),
                seed,
                trials,
            ),
        })
        .map_err(py_err)?;
    report_dict(py, &report)
}

#[pymodule]
fn aptb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyUniverse>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyPublication>()?;
    m.add_function(wrap_pyfunction!(publish, m)?)?;
    m.add_function(wrap_pyfunction!(publish_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(avg_relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(length_distribution_l1, m)?)?;
    m.add_function(wrap_pyfunction!(dp_check, m)?)?;
    Ok(())
}
