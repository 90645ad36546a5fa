//! Python bindings: datasets, collection, diffusion training and sampling,
//! fidelity metrics, augmentation, and the CLI pipelines.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use synther_core::augment::{upsample_with_augmentation, AugmentationScheme};
use synther_core::config::RunConfig;
use synther_core::data::{load_dataset, save_dataset, Normalizer, TransitionDataset, TransitionSchema};
use synther_core::edm::{self, load_model, save_model, DenoiserConfig, EdmConfig};
use synther_core::envs::{collect_dataset, BehaviorPolicy, EnvKind};
use synther_core::metrics::{CompressionReport, CorrelationKind, MetricReport, DEFAULT_MAX_SAMPLES};
use synther_core::pipeline::{self, Command};
use synther_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(format!("{}: {other}", other.kind())),
    }
}

/// Flattened `[s | a | r | s' | d]` rows.
#[pyclass(name = "Dataset", module = "synther", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: TransitionDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (state_dim, action_dim, has_terminal, rows))]
    fn new(state_dim: usize, action_dim: usize, has_terminal: bool, rows: Vec<f32>) -> PyResult<Self> {
        let schema = TransitionSchema::new(state_dim, action_dim, has_terminal).map_err(py_err)?;
        Ok(Self {
            inner: TransitionDataset::new(schema, rows).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_dataset(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_dataset(&self.inner, path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.count()
    }

    #[getter]
    fn row_dim(&self) -> usize {
        self.inner.row_dim()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.schema().state_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.schema().action_dim()
    }

    #[getter]
    fn has_terminal(&self) -> bool {
        self.inner.schema().has_terminal()
    }

    fn column_names(&self) -> Vec<String> {
        self.inner.schema().column_names()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f32>> {
        if i >= self.inner.count() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    /// All rows, flattened row-major.
    fn rows(&self) -> Vec<f32> {
        self.inner.as_slice().to_vec()
    }

    fn subsample(&self, fraction: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.subsample(fraction, seed).map_err(py_err)?,
        })
    }

    fn concat(&self, other: &PyDataset) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.concat(&other.inner).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let s = self.inner.schema();
        format!(
            "Dataset(rows={}, state_dim={}, action_dim={}, has_terminal={})",
            self.inner.count(),
            s.state_dim(),
            s.action_dim(),
            s.has_terminal()
        )
    }
}

/// Diffusion model over normalized transition rows.
#[pyclass(name = "DiffusionModel", module = "synther")]
struct PyModel {
    inner: edm::DiffusionModel,
}

#[pymethods]
impl PyModel {
    /// Fits the normalizer on `data` and trains for `train_steps` steps.
    #[staticmethod]
    #[pyo3(signature = (data, width=1024, depth=6, train_steps=100_000, sampler_steps=128, seed=0))]
    fn train(
        py: Python<'_>,
        data: &PyDataset,
        width: usize,
        depth: usize,
        train_steps: usize,
        sampler_steps: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let d = &data.inner;
        let cfg = EdmConfig {
            train_steps,
            steps: sampler_steps,
            ..EdmConfig::default()
        };
        let den = DenoiserConfig {
            width,
            depth,
            ..DenoiserConfig::default()
        };
        let model = py
            .detach(|| {
                let mut m = edm::DiffusionModel::new(d.schema(), Normalizer::fit(d)?, den, cfg, seed)?;
                edm::train(&mut m, d, synther_core::rng::derive_seed(seed, 1))?;
                Ok::<_, Error>(m)
            })
            .map_err(py_err)?;
        Ok(Self { inner: model })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_model(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[pyo3(signature = (count, seed=0))]
    fn generate(&self, py: Python<'_>, count: usize, seed: u64) -> PyResult<PyDataset> {
        let inner = py.detach(|| edm::generate(&self.inner, count, seed)).map_err(py_err)?;
        Ok(PyDataset { inner })
    }
}

fn env_kind(name: &str) -> PyResult<EnvKind> {
    EnvKind::by_name(name).map_err(py_err)
}

/// Collects `count` transitions with a uniform random policy.
#[pyfunction]
#[pyo3(signature = (env, count, seed=0))]
fn collect(py: Python<'_>, env: &str, count: usize, seed: u64) -> PyResult<PyDataset> {
    let kind = env_kind(env)?;
    let inner = py
        .detach(|| collect_dataset(kind, &BehaviorPolicy::Random, count, seed))
        .map_err(py_err)?;
    Ok(PyDataset { inner })
}

/// `(marginal, correlation)` fidelity scores.
#[pyfunction]
#[pyo3(signature = (real, synth, correlation="pearson", max_samples=DEFAULT_MAX_SAMPLES, seed=0))]
fn fidelity(
    real: &PyDataset,
    synth: &PyDataset,
    correlation: &str,
    max_samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let kind = CorrelationKind::by_name(correlation).map_err(py_err)?;
    let r = MetricReport::compute(&real.inner, &synth.inner, kind, max_samples, seed).map_err(py_err)?;
    Ok((r.marginal, r.correlation))
}

/// Upsamples with `additive`, `multiplicative` or `dynamics` augmentation.
#[pyfunction]
#[pyo3(signature = (data, scheme, target, seed=0))]
fn augment(data: &PyDataset, scheme: &str, target: usize, seed: u64) -> PyResult<PyDataset> {
    let scheme = AugmentationScheme::by_name(scheme).map_err(py_err)?;
    Ok(PyDataset {
        inner: upsample_with_augmentation(&data.inner, &scheme, target, seed).map_err(py_err)?,
    })
}

/// `(ratio, "N.N×")` for a float count over a parameter count.
#[pyfunction]
fn compression(floats: f64, params: f64) -> PyResult<(f64, String)> {
    let c = CompressionReport::new(floats, params).map_err(py_err)?;
    Ok((c.ratio, c.formatted()))
}

/// Runs a CLI command with a `key=value` config into `<out>/<command>-<hash>`
/// and returns the run directory.
#[pyfunction]
#[pyo3(signature = (command, config="", out=None))]
fn run(py: Python<'_>, command: &str, config: &str, out: Option<PathBuf>) -> PyResult<String> {
    let command = Command::by_name(command).map_err(py_err)?;
    let cfg = RunConfig::from_text(config).map_err(py_err)?;
    let out = out.unwrap_or_else(|| PathBuf::from("runs"));
    let dir = pipeline::run_dir(&out, command, &cfg);
    let outcome = py.detach(|| pipeline::run(command, &cfg, &dir)).map_err(py_err)?;
    Ok(outcome.dir.display().to_string())
}

#[pymodule]
fn synther(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(collect, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(augment, m)?)?;
    m.add_function(wrap_pyfunction!(compression, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
