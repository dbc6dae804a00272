//! Python bindings. Reports are returned as JSON strings.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use thermalfield::balanced;
use thermalfield::correlators::{self, Profile, QuadratureConfig, StripPoint};
use thermalfield::equilibrium;
use thermalfield::minkowski::{FourVector, InverseTemperatureVector};
use thermalfield::spectral::{MixtureComponent, StateSpec};
use thermalfield::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidInput(_) | Error::Domain(_) | Error::Unsupported(_) | Error::Json(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn vector(v: [f64; 4]) -> PyResult<FourVector> {
    FourVector::new(v[0], v[1], v[2], v[3]).map_err(to_py)
}

fn beta_vector(v: [f64; 4]) -> PyResult<InverseTemperatureVector> {
    InverseTemperatureVector::try_from(v).map_err(to_py)
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| to_py(e.into()))
}

/// A two-point function state.
#[pyclass(name = "State", frozen)]
#[derive(Clone)]
struct PyState(StateSpec);

#[pymethods]
impl PyState {
    #[staticmethod]
    #[pyo3(signature = (mass=0.0))]
    fn vacuum(mass: f64) -> PyResult<Self> {
        StateSpec::vacuum(mass).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn kms(mass: f64, beta: [f64; 4]) -> PyResult<Self> {
        StateSpec::kms(mass, beta_vector(beta)?).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn hot_bang(a: f64) -> PyResult<Self> {
        StateSpec::hot_bang(a).map(PyState).map_err(to_py)
    }

    /// `components` is a list of (weight, beta-vector) pairs.
    #[staticmethod]
    fn mixture(mass: f64, components: Vec<(f64, [f64; 4])>) -> PyResult<Self> {
        let components = components
            .into_iter()
            .map(|(weight, b)| {
                Ok(MixtureComponent {
                    weight,
                    beta: beta_vector(b)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        StateSpec::mixture(mass, components).map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        StateSpec::from_json(text).map(PyState).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass()
    }

    fn __repr__(&self) -> String {
        format!("State({})", self.0.to_json())
    }
}

/// Quadrature settings from a named profile.
#[pyclass(name = "Config", frozen)]
#[derive(Clone, Copy)]
struct PyConfig(QuadratureConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (profile="default"))]
    fn new(profile: &str) -> PyResult<Self> {
        Ok(PyConfig(profile.parse::<Profile>().map_err(to_py)?.config()))
    }

    fn to_json(slf: &Bound<'_, Self>) -> PyResult<String> {
        json(&slf.get().0)
    }
}

fn config_or_default(config: Option<PyConfig>) -> QuadratureConfig {
    config.map_or_else(|| Profile::Default.config(), |c| c.0)
}

/// F_q(z + iσe) with e the direction of `beta`; returns (value, error).
#[pyfunction]
#[pyo3(signature = (state, q, z, sigma, beta, config=None))]
fn eval_strip(
    state: &PyState,
    q: [f64; 4],
    z: [f64; 4],
    sigma: f64,
    beta: [f64; 4],
    config: Option<PyConfig>,
) -> PyResult<(Complex64, f64)> {
    let point = StripPoint::new(vector(z)?, sigma, &beta_vector(beta)?).map_err(to_py)?;
    let v = correlators::eval_strip(&state.0, &vector(q)?, &point, &config_or_default(config)).map_err(to_py)?;
    Ok((v.value, v.error))
}

/// Balanced derivative of order n at q as (JSON tensor, error estimate).
#[pyfunction]
#[pyo3(signature = (state, q, order, config=None))]
fn taylor_tensor(state: &PyState, q: [f64; 4], order: usize, config: Option<PyConfig>) -> PyResult<(String, f64)> {
    let d = balanced::taylor_tensor(&state.0, &vector(q)?, order, &config_or_default(config)).map_err(to_py)?;
    Ok((json(&d.tensor)?, d.error_estimate))
}

#[pyfunction]
fn thermal_function(order: usize, beta: [f64; 4]) -> PyResult<String> {
    json(&balanced::thermal_function(order, &beta_vector(beta)?).map_err(to_py)?)
}

#[pyfunction]
fn calibration() -> PyResult<Vec<(usize, f64, f64)>> {
    Ok(balanced::calibration()
        .map_err(to_py)?
        .iter()
        .map(|c| (c.order, c.c_n, c.residual))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (state, q, beta, order=2, tol=1e-6, config=None))]
fn check_lte(
    state: &PyState,
    q: [f64; 4],
    beta: [f64; 4],
    order: usize,
    tol: f64,
    config: Option<PyConfig>,
) -> PyResult<String> {
    let r = equilibrium::check_lte(
        &state.0,
        &vector(q)?,
        &beta_vector(beta)?,
        order,
        tol,
        &config_or_default(config),
    )
    .map_err(to_py)?;
    json(&r)
}

#[pyfunction]
#[pyo3(signature = (state, q, beta, k_max, tol=1e-8, config=None))]
fn check_lkms(
    state: &PyState,
    q: [f64; 4],
    beta: [f64; 4],
    k_max: f64,
    tol: f64,
    config: Option<PyConfig>,
) -> PyResult<String> {
    let r = equilibrium::check_lkms_momentum(
        &state.0,
        &vector(q)?,
        &beta_vector(beta)?,
        k_max,
        tol,
        &config_or_default(config),
    )
    .map_err(to_py)?;
    json(&r)
}

/// Returns (beta-vector, fit residual).
#[pyfunction]
#[pyo3(signature = (state, q, config=None))]
fn extract_temperature(state: &PyState, q: [f64; 4], config: Option<PyConfig>) -> PyResult<([f64; 4], f64)> {
    let r = equilibrium::extract_temperature(&state.0, &vector(q)?, 0.0, &config_or_default(config)).map_err(to_py)?;
    Ok((r.beta_vec.vector().components(), r.fit_residual))
}

/// Returns (weights, residual).
#[pyfunction]
#[pyo3(signature = (state, q, candidates, order=2, config=None))]
fn fit_mixture(
    state: &PyState,
    q: [f64; 4],
    candidates: Vec<[f64; 4]>,
    order: usize,
    config: Option<PyConfig>,
) -> PyResult<(Vec<f64>, f64)> {
    let candidates = candidates.into_iter().map(beta_vector).collect::<PyResult<Vec<_>>>()?;
    let r = equilibrium::fit_mixture(&state.0, &vector(q)?, &candidates, order, &config_or_default(config))
        .map_err(to_py)?;
    Ok((r.weights, r.residual))
}

#[pymodule]
fn thermalfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(eval_strip, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_function, m)?)?;
    m.add_function(wrap_pyfunction!(calibration, m)?)?;
    m.add_function(wrap_pyfunction!(check_lte, m)?)?;
    m.add_function(wrap_pyfunction!(check_lkms, m)?)?;
    m.add_function(wrap_pyfunction!(extract_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mixture, m)?)?;
    Ok(())
}
