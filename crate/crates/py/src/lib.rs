//! Python module `lana`: load instances, run the diverse solver, the random
//! baseline and the ranking utilities.
//!
//!     import lana
//!     inst = lana.Instance.load("resnet50.json")
//!     report = lana.solve(inst, inst.budget_from_ratio(0.45), k=10)
//!     for s in report["solutions"]:
//!         print(s["objective"], s["cost_ms"], s["choices"])

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lana_core::baselines::{random_search as core_random_search, SamplerConfig};
use lana_core::lut_io::{parse_instance, write_instance, write_report, zero_shot_pool};
use lana_core::proxy_eval::{kendall_tau as core_kendall_tau, rank_candidates, selection_histogram};
use lana_core::synthetic::{random_instance, SyntheticConfig};
use lana_core::{
    budget_from_ratio, cost, objective, solve_k_diverse, Budget, SearchInstance, Selection, SolverConfig,
};

fn err(e: lana_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn budget(ms: f64) -> PyResult<Budget> {
    Budget::new(ms).map_err(err)
}

/// A validated search instance (per-layer candidate op tables).
#[pyclass(name = "Instance", frozen)]
struct Instance {
    inner: SearchInstance,
}

#[pymethods]
impl Instance {
    /// Parse an instance from its JSON text.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_instance(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        Self::from_json(&text)
    }

    /// Seeded synthetic instance with `ops` candidates per layer.
    #[staticmethod]
    #[pyo3(signature = (layers, ops, seed=0, negative_fraction=0.0))]
    fn synthetic(layers: usize, ops: usize, seed: u64, negative_fraction: f64) -> PyResult<Self> {
        if layers < 1 || ops < 1 {
            return Err(PyValueError::new_err("layers and ops must be at least 1"));
        }
        if !(0.0..=1.0).contains(&negative_fraction) {
            return Err(PyValueError::new_err("negative_fraction must be in [0, 1]"));
        }
        let cfg = SyntheticConfig {
            negative_fraction,
            ..SyntheticConfig::new(layers, ops)
        };
        Ok(Self {
            inner: random_instance(&cfg, seed),
        })
    }

    fn to_json(&self) -> String {
        write_instance(&self.inner)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.inner.num_layers()
    }

    #[getter]
    fn teacher_cost(&self) -> f64 {
        self.inner.teacher_cost()
    }

    #[getter]
    fn pool_sizes(&self) -> Vec<usize> {
        self.inner.pool_sizes()
    }

    fn teacher_selection(&self) -> Vec<usize> {
        self.inner.teacher_selection().0
    }

    /// op_id of every candidate at `layer`.
    fn op_ids(&self, layer: usize) -> PyResult<Vec<String>> {
        let l = self
            .inner
            .layers
            .get(layer)
            .ok_or_else(|| PyValueError::new_err(format!("no layer {layer}")))?;
        Ok(l.ops.iter().map(|o| o.op_id.clone()).collect())
    }

    fn objective(&self, choices: Vec<usize>) -> PyResult<f64> {
        objective(&self.inner, &Selection::new(choices)).map_err(err)
    }

    fn cost(&self, choices: Vec<usize>) -> PyResult<f64> {
        cost(&self.inner, &Selection::new(choices)).map_err(err)
    }

    /// Budget in ms for a fraction of the teacher's latency.
    fn budget_from_ratio(&self, ratio: f64) -> PyResult<f64> {
        Ok(budget_from_ratio(&self.inner, ratio).map_err(err)?.limit)
    }

    /// Same instance restricted to teacher + identity at every layer.
    #[pyo3(signature = (identity_id="identity", allow_missing=false))]
    fn zero_shot(&self, identity_id: &str, allow_missing: bool) -> PyResult<Self> {
        Ok(Self {
            inner: zero_shot_pool(&self.inner, identity_id, allow_missing).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(name={:?}, layers={}, ops={})",
            self.inner.name,
            self.inner.num_layers(),
            self.inner.pool_sizes().iter().sum::<usize>()
        )
    }
}

/// Up to `k` diverse solutions under `budget_ms`, as a report dict.
#[pyfunction]
#[pyo3(signature = (instance, budget_ms, k=1, overlap=0.7, time_limit=60.0, threads=1))]
fn solve<'py>(
    py: Python<'py>,
    instance: &Instance,
    budget_ms: f64,
    k: usize,
    overlap: f64,
    time_limit: f64,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let b = budget(budget_ms)?;
    let config = SolverConfig {
        time_limit_s: time_limit,
        threads,
        ..SolverConfig::default()
    };
    let inst = &instance.inner;
    let report = py.detach(|| solve_k_diverse(inst, b, k, overlap, &config)).map_err(err)?;

    let solutions = report
        .solutions
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("choices", s.selection.0.clone())?;
            d.set_item("objective", s.objective)?;
            d.set_item("cost_ms", s.cost_ms)?;
            d.set_item("status", s.status.as_str())?;
            d.set_item("gap", s.gap)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("instance", &report.instance)?;
    d.set_item("budget_ms", report.budget_ms)?;
    d.set_item("overlap_limit", report.overlap_limit)?;
    d.set_item("solutions", solutions)?;
    d.set_item("wall_time_s", report.wall_time_s)?;
    d.set_item("json", write_report(&report).map_err(err)?)?;
    Ok(d)
}

/// Kendall tau-b (tie-corrected).
#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    core_kendall_tau(&x, &y).map_err(err)
}

/// Seeded random feasible samples: dict with best, objectives, failures.
#[pyfunction]
#[pyo3(signature = (instance, budget_ms, n=1000, seed=0))]
fn random_search<'py>(
    py: Python<'py>,
    instance: &Instance,
    budget_ms: f64,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let b = budget(budget_ms)?;
    let inst = &instance.inner;
    let r = py
        .detach(|| core_random_search(inst, b, n, &SamplerConfig::new(seed)))
        .map_err(err)?;
    let best = PyDict::new(py);
    best.set_item("sample_index", r.best.sample_index)?;
    best.set_item("choices", r.best.selection.0.clone())?;
    best.set_item("objective", r.best.objective)?;
    best.set_item("cost_ms", r.best.cost_ms)?;
    let d = PyDict::new(py);
    d.set_item("best", best)?;
    d.set_item("objectives", r.objectives())?;
    d.set_item("failures", r.failures)?;
    Ok(d)
}

/// `(op_id, count, fraction)` rows by descending count.
#[pyfunction]
fn op_histogram(instance: &Instance, solutions: Vec<Vec<usize>>) -> PyResult<Vec<(String, usize, f64)>> {
    let sels: Vec<Selection> = solutions.into_iter().map(Selection::new).collect();
    let h = selection_histogram(&instance.inner, &sels).map_err(err)?;
    Ok(h.rows().into_iter().map(|(op, c, f)| (op.to_string(), c, f)).collect())
}

/// Input indices of `solutions` in rank order (measured score when given,
/// otherwise proxy objective).
#[pyfunction]
#[pyo3(signature = (instance, solutions, measured=None))]
fn rank(instance: &Instance, solutions: Vec<Vec<usize>>, measured: Option<Vec<f64>>) -> PyResult<Vec<usize>> {
    let sels: Vec<Selection> = solutions.into_iter().map(Selection::new).collect();
    let r = rank_candidates(&instance.inner, &sels, measured.as_deref()).map_err(err)?;
    Ok(r.entries.iter().map(|e| e.input_index).collect())
}

#[pymodule]
fn lana(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(random_search, m)?)?;
    m.add_function(wrap_pyfunction!(op_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(rank, m)?)?;
    Ok(())
}
