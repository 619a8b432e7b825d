//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use msmda::data::{self, DomainDataset, NormKind, SynthConfig};
use msmda::harness::{self, ExperimentConfig, Suite, VerifyOptions};
use msmda::losses::{self, KernelSpec};
use msmda::model::{ModelConfig, MsMdaModel};
use msmda::neuralcore::Matrix;
use msmda::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Parse { .. } | Error::Data(_) | Error::Json(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

fn kernel(kind: &str, bandwidth: Option<f64>) -> PyResult<KernelSpec> {
    match (kind, bandwidth) {
        ("rbf_multiscale", None) => Ok(KernelSpec::default()),
        ("rbf_fixed", Some(b)) => Ok(KernelSpec::RbfFixed { bandwidth: b }),
        ("rbf_fixed", None) => Err(PyValueError::new_err("rbf_fixed needs a bandwidth")),
        ("linear", None) => Ok(KernelSpec::Linear),
        (k, _) => Err(PyValueError::new_err(format!("unsupported kernel {k:?}"))),
    }
}

type Grads = (f64, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Squared MMD between two row sets and its gradients with respect to each.
#[pyfunction]
#[pyo3(signature = (source, target, kernel_kind = "rbf_multiscale", bandwidth = None))]
fn mmd_squared(
    source: Vec<Vec<f64>>,
    target: Vec<Vec<f64>>,
    kernel_kind: &str,
    bandwidth: Option<f64>,
) -> PyResult<Grads> {
    let out = losses::mmd_squared(
        &matrix(source)?,
        &matrix(target)?,
        &kernel(kernel_kind, bandwidth)?,
    )
    .map_err(to_py)?;
    Ok((out.value, rows(&out.grad_source), rows(&out.grad_target)))
}

#[pyfunction]
fn alpha_schedule(epoch: usize, epochs: usize) -> PyResult<f64> {
    losses::alpha_schedule(epoch, epochs).map_err(to_py)
}

#[pyfunction]
fn de_gaussian(window: Vec<f64>) -> PyResult<f64> {
    data::de_gaussian(&window).map_err(to_py)
}

/// `kind` is one of none, electrode, sample, global.
#[pyfunction]
fn normalize(features: Vec<Vec<f64>>, kind: &str) -> PyResult<Vec<Vec<f64>>> {
    let kind: NormKind = kind.parse().map_err(to_py)?;
    Ok(rows(&data::normalize(&matrix(features)?, kind)))
}

/// Synthetic domains as `(features, labels, (session, subject))` tuples.
/// `config` is a JSON object with the generator fields; omitted means defaults.
#[pyfunction]
#[pyo3(signature = (config = None))]
#[allow(clippy::type_complexity)]
fn generate_synthetic(
    config: Option<&str>,
) -> PyResult<Vec<(Vec<Vec<f64>>, Vec<usize>, (u32, u32))>> {
    let cfg: SynthConfig = match config {
        Some(text) => {
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?
        }
        None => SynthConfig::default(),
    };
    let domains = data::generate_synthetic(&cfg).map_err(to_py)?;
    Ok(domains
        .iter()
        .map(|d: &DomainDataset| {
            (
                rows(&d.features),
                d.labels.clone(),
                (d.domain_id.session, d.domain_id.subject),
            )
        })
        .collect())
}

/// Runs the named self-check suite; returns `(passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (suite = "all"))]
fn verify(suite: &str) -> PyResult<(bool, String)> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let report = harness::verify(suite, &VerifyOptions::default()).map_err(to_py)?;
    Ok((report.passed(), report.to_string()))
}

/// Runs an experiment from its JSON config and returns the summary as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let outcome = py.detach(|| harness::run_experiment(&cfg)).map_err(to_py)?;
    serde_json::to_string(&outcome.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyclass(name = "Model")]
struct PyModel {
    inner: MsMdaModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (input_dim, num_classes, num_branches, cfe_dims = None, dsfe_dim = 32, seed = 0))]
    fn new(
        input_dim: usize,
        num_classes: usize,
        num_branches: usize,
        cfe_dims: Option<Vec<usize>>,
        dsfe_dim: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let defaults = ModelConfig::default();
        let cfg = ModelConfig {
            input_dim,
            cfe_dims: cfe_dims.unwrap_or(defaults.cfe_dims),
            dsfe_dim,
            num_classes,
            num_branches,
            leaky_slope: defaults.leaky_slope,
            rng_seed: seed,
        };
        Ok(Self {
            inner: MsMdaModel::new(cfg).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: MsMdaModel::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[getter]
    fn num_branches(&self) -> usize {
        self.inner.num_branches()
    }

    /// Predicted labels and branch-averaged class probabilities.
    fn predict(&self, features: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
        let p = self.inner.predict(&matrix(features)?).map_err(to_py)?;
        Ok((p.labels, rows(&p.avg_probs)))
    }

    fn branch_features(&self, features: Vec<Vec<f64>>, branch: usize) -> PyResult<Vec<Vec<f64>>> {
        let f = self
            .inner
            .extract_branch_features(&matrix(features)?, branch)
            .map_err(to_py)?;
        Ok(rows(&f))
    }
}

#[pymodule]
fn msmda_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mmd_squared, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(de_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
