//! Python bindings. Matrices cross the boundary as lists of rows; data
//! matrices are `d × n` (one row per variable), as in the CSV formats.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use colide::cli::{self, Fitted, Method, SimSpec};
use colide::graphs::{count_dags as count, WeightedDigraph};
use colide::io::FitConfig;
use colide::metrics::MetricsReport;
use colide::scores::NoiseEstimate;

fn py_err(e: colide::Error) -> PyErr {
    match e {
        colide::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Dense matrix from a list of equal-length rows.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err("matrix must be a nonempty list of nonempty rows".into());
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("rows differ in length".into());
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    matrix_from_rows(&rows).map_err(PyValueError::new_err)
}

fn graph(rows: Vec<Vec<f64>>) -> PyResult<WeightedDigraph> {
    WeightedDigraph::new(matrix(rows)?).map_err(py_err)
}

/// Number of labelled DAGs on `d` nodes.
#[pyfunction]
fn count_dags(d: usize) -> BigUint {
    count(d)
}

/// Simulates one design from a JSON spec (same schema as `colide simulate`).
/// Returns `{"truth", "data", "sigmas", "lags"}`.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, spec: &str, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let spec: SimSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let sim = cli::simulate(&spec, seed).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("truth", rows_of(sim.truth.weights()))?;
    out.set_item("data", rows_of(&sim.x))?;
    out.set_item("sigmas", sim.sigmas)?;
    out.set_item("lags", sim.lags.iter().map(rows_of).collect::<Vec<_>>())?;
    Ok(out)
}

/// Fits `method` (`colide-ev`, `colide-nv`, `dagma-ols`, `nomad`,
/// `nomad-svarm`) to `data` (d × n). `config` is an optional JSON string.
#[pyfunction]
#[pyo3(signature = (data, method, config=None))]
fn fit<'py>(py: Python<'py>, data: Vec<Vec<f64>>, method: &str, config: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let method: Method = method.parse().map_err(py_err)?;
    let cfg = match config {
        Some(text) => FitConfig::from_json(text).map_err(py_err)?,
        None => FitConfig::default(),
    };
    let x = matrix(data)?;
    let fitted = py.detach(|| cli::fit_method(method, &cfg, &x)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("weights", rows_of(fitted.w().weights()))?;
    out.set_item("edges", fitted.w().edges())?;
    out.set_item("converged", fitted.converged())?;
    match &fitted {
        Fitted::Static(f) => {
            out.set_item("weights_raw", rows_of(&f.w_raw))?;
            match &f.noise {
                Some(NoiseEstimate::Ev { sigma, .. }) => out.set_item("sigma", *sigma)?,
                Some(NoiseEstimate::Nv { sigmas, .. }) => out.set_item("sigmas", sigmas.clone())?,
                None => {}
            }
        }
        Fitted::Svarm(f) => {
            out.set_item("weights_raw", rows_of(&f.w_raw))?;
            out.set_item("lags", f.lags.iter().map(rows_of).collect::<Vec<_>>())?;
        }
    }
    Ok(out)
}

/// Recovery metrics of an acyclic estimate against an acyclic truth.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, estimate: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let r = MetricsReport::compute(&graph(estimate)?, &graph(truth)?).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("shd", r.shd)?;
    out.set_item("shd_c", r.shd_c)?;
    out.set_item("fdr", r.fdr)?;
    out.set_item("tpr", r.tpr)?;
    out.set_item("f1", r.f1)?;
    out.set_item("sid", r.sid)?;
    out.set_item("nmse", r.nmse)?;
    out.set_item("n_edges_est", r.n_edges_est)?;
    out.set_item("n_edges_true", r.n_edges_true)?;
    Ok(out)
}

#[pymodule]
fn colide_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(count_dags, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
