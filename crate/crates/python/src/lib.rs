//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists, built from the serde form of the core types.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use webskill_core::evolution::utility as core_utility;
use webskill_core::harness::{run_experiment, split_tasks, Harness as CoreHarness, HarnessConfig};
use webskill_core::induction::AttributionMode;
use webskill_core::runtime::parse_action;
use webskill_core::selector::{parse_selector, query};
use webskill_core::sim::{Task, WebEnv};
use webskill_core::skill::{library_from_str, library_to_string, load_library, save_library, validate_library, SkillLibrary};
use webskill_core::taxonomy::FailureMode;

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A skill library snapshot.
#[pyclass(name = "Library", skip_from_py_object)]
#[derive(Clone, Default)]
struct PyLibrary {
    inner: SkillLibrary,
}

#[pymethods]
impl PyLibrary {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_library(&path).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = library_from_str(text, "<python>".as_ref()).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_library(&self.inner, &path).map_err(runtime_err)
    }

    fn to_json(&self) -> String {
        library_to_string(&self.inner)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    #[getter]
    fn round(&self) -> u32 {
        self.inner.round
    }

    fn skill_ids(&self) -> Vec<String> {
        self.inner.skill_ids().map(str::to_string).collect()
    }

    /// Invariant violations; empty when the library is well formed.
    fn validate(&self) -> Vec<String> {
        validate_library(&self.inner).messages()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Library(round={}, reasoning={}, interaction={})",
            self.inner.round,
            self.inner.reasoning.len(),
            self.inner.interaction.len()
        )
    }
}

/// One simulated site. Actions use the textual action grammar.
#[pyclass(name = "Env", unsendable)]
struct PyEnv {
    inner: WebEnv,
    tasks: Vec<Task>,
    current: Option<Task>,
}

#[pymethods]
impl PyEnv {
    fn reset(&mut self, py: Python<'_>, task_id: &str) -> PyResult<Py<PyAny>> {
        let task = self
            .tasks
            .iter()
            .find(|t| t.task_id == task_id)
            .cloned()
            .ok_or_else(|| value_err(format!("no task {task_id} on this site")))?;
        let obs = self.inner.reset(&task).map_err(runtime_err)?;
        self.current = Some(task);
        to_py(py, &obs)
    }

    /// Executes e.g. `click(#search-btn)` or `type(#q, "blue mug")`.
    fn step(&mut self, py: Python<'_>, action: &str) -> PyResult<Py<PyAny>> {
        let parsed = parse_action(action).map_err(value_err)?;
        let page = self.inner.current_page().map_err(runtime_err)?;
        let obs = self.inner.step(&parsed.resolve(&page)).map_err(runtime_err)?;
        to_py(py, &obs)
    }

    fn observe(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.observe().map_err(runtime_err)?)
    }

    /// Element keys matching `selector` on the current page, in document order.
    fn query(&self, selector: &str) -> PyResult<Vec<String>> {
        let sel = parse_selector(selector).map_err(value_err)?;
        let page = self.inner.current_page().map_err(runtime_err)?;
        Ok(query(&sel, &page).into_iter().map(|k| k.0).collect())
    }

    fn apply_drift(&mut self, version: u32) -> PyResult<()> {
        self.inner.apply_drift(version).map_err(value_err)
    }

    #[getter]
    fn terminated(&self) -> bool {
        self.inner.is_terminated()
    }

    /// Ends the episode if needed and checks the task's success predicate.
    fn evaluate(&mut self) -> PyResult<bool> {
        let task = self.current.clone().ok_or_else(|| value_err("reset the env first"))?;
        if !self.inner.is_terminated() {
            self.inner.terminate();
        }
        self.inner.evaluate_task(&task).map_err(runtime_err)
    }
}

/// Sites, tasks and agent loaded from a harness configuration file.
#[pyclass(name = "Harness", unsendable)]
struct PyHarness {
    inner: CoreHarness,
}

impl PyHarness {
    fn partition(&self) -> PyResult<(Vec<Task>, Vec<Task>)> {
        let c = &self.inner.config;
        split_tasks(&self.inner.tasks, c.train_fraction, c.seed).map_err(runtime_err)
    }
}

#[pymethods]
impl PyHarness {
    #[new]
    #[pyo3(signature = (config, seed=None, attribution=None))]
    fn new(config: PathBuf, seed: Option<u64>, attribution: Option<&str>) -> PyResult<Self> {
        let mut cfg = HarnessConfig::load(&config).map_err(value_err)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(a) = attribution {
            cfg.attribution = a.parse::<AttributionMode>().map_err(value_err)?;
        }
        Ok(Self { inner: CoreHarness::load(cfg).map_err(value_err)? })
    }

    fn tasks(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.tasks)
    }

    /// Task ids of the (train, test) partition.
    fn split(&self) -> PyResult<(Vec<String>, Vec<String>)> {
        let (train, test) = self.partition()?;
        let ids = |ts: Vec<Task>| ts.into_iter().map(|t| t.task_id).collect();
        Ok((ids(train), ids(test)))
    }

    fn apply_drift(&mut self, version: u32) -> PyResult<()> {
        self.inner.apply_drift(version).map_err(value_err)
    }

    fn env(&self, site_id: &str) -> PyResult<PyEnv> {
        let inner = self.inner.env_for(site_id).map_err(value_err)?;
        let tasks = self.inner.tasks.iter().filter(|t| t.site_id == site_id).cloned().collect();
        Ok(PyEnv { inner, tasks, current: None })
    }

    /// One training round over the train split; returns the evolved library.
    fn train_round(&self, library: &PyLibrary) -> PyResult<PyLibrary> {
        let (train, _) = self.partition()?;
        let out = self
            .inner
            .run_training_round(&train, &library.inner, self.inner.config.attribution)
            .map_err(runtime_err)?;
        Ok(PyLibrary { inner: out.library })
    }

    /// Metrics for a fixed library on the test split, or on every task.
    #[pyo3(signature = (library, all_tasks=false))]
    fn evaluate(&self, py: Python<'_>, library: &PyLibrary, all_tasks: bool) -> PyResult<Py<PyAny>> {
        let tasks = if all_tasks { self.inner.tasks.clone() } else { self.partition()?.1 };
        let (metrics, _) = self.inner.run_evaluation(&tasks, &library.inner).map_err(runtime_err)?;
        to_py(py, &metrics)
    }

    /// Full experiment written under `out`; returns (metrics, final library).
    #[pyo3(signature = (rounds, out, library=None))]
    fn run(&self, py: Python<'_>, rounds: u32, out: PathBuf, library: Option<&PyLibrary>) -> PyResult<(Py<PyAny>, PyLibrary)> {
        let start = library.map(|l| l.inner.clone()).unwrap_or_default();
        let (metrics, lib) = run_experiment(&self.inner, start, rounds, &out).map_err(runtime_err)?;
        Ok((to_py(py, &metrics)?, PyLibrary { inner: lib }))
    }
}

/// Smoothed success rate (S + λ) / (N + 2λ).
#[pyfunction]
#[pyo3(signature = (usage, successes, smoothing=1.0))]
fn utility(usage: u64, successes: u64, smoothing: f64) -> PyResult<f64> {
    if successes > usage {
        return Err(value_err("successes cannot exceed usage"));
    }
    Ok(core_utility(usage, successes, smoothing))
}

/// Canonical spelling of a selector.
#[pyfunction]
fn normalize_selector(selector: &str) -> PyResult<String> {
    Ok(parse_selector(selector).map_err(value_err)?.to_string())
}

#[pyfunction]
fn failure_modes() -> Vec<(String, String)> {
    FailureMode::ALL.iter().map(|m| (m.to_string(), format!("{:?}", m.level()))).collect()
}

#[pymodule]
fn webskill(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLibrary>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyHarness>()?;
    m.add_function(wrap_pyfunction!(utility, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_selector, m)?)?;
    m.add_function(wrap_pyfunction!(failure_modes, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_rejects_impossible_counts() {
        assert_eq!(utility(10, 2, 1.0).unwrap(), 0.25);
        assert!(utility(1, 2, 1.0).is_err());
    }

    #[test]
    fn selectors_round_trip() {
        assert_eq!(normalize_selector("text=\"Add to cart\"").unwrap(), "text=\"Add to cart\"");
        assert!(normalize_selector("a  b").is_err());
    }

    #[test]
    fn library_json_round_trip() {
        let lib = PyLibrary::new();
        let back = PyLibrary::from_json(&lib.to_json()).unwrap();
        assert_eq!(back.__len__(), 0);
        assert_eq!(back.__repr__(), "Library(round=0, reasoning=0, interaction=0)");
    }
}
