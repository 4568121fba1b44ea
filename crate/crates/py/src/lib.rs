//! Python bindings. States are 1-based on the Python side, as in files and
//! the CLI.

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gmhmm::io::{self, PricePoint, PriceSeries};
use gmhmm::mixture::Moments;
use gmhmm::risk::{self, FactorSpec, StressSpec};
use gmhmm::{calibration, fixtures, rng, scenario, Error, ObservationSeries};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn state_index(state: usize, n: usize) -> PyResult<usize> {
    if state == 0 || state > n {
        return Err(PyValueError::new_err(format!(
            "state {state} outside 1..={n}"
        )));
    }
    Ok(state - 1)
}

fn moments_dict<'py>(py: Python<'py>, m: &Moments) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", m.mean)?;
    d.set_item("variance", m.variance)?;
    d.set_item("skewness", m.skewness)?;
    d.set_item("excess_kurtosis", m.excess_kurtosis)?;
    Ok(d)
}

#[pyclass(name = "GaussianMixture", module = "pygmhmm", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyMixture {
    inner: gmhmm::GaussianMixture,
}

#[pymethods]
impl PyMixture {
    #[new]
    fn new(weights: Vec<f64>, means: Vec<f64>, sigmas: Vec<f64>) -> PyResult<Self> {
        let inner =
            gmhmm::GaussianMixture::from_params(&weights, &means, &sigmas).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.to_params().means
    }

    #[getter]
    fn sigmas(&self) -> Vec<f64> {
        self.inner.to_params().sigmas
    }

    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn quantile(&self, p: f64) -> PyResult<f64> {
        self.inner.quantile(p).map_err(py_err)
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn weighted_sigma(&self) -> f64 {
        self.inner.weighted_sigma()
    }

    fn moments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        moments_dict(py, &self.inner.central_moments())
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(seed);
        (0..n).map(|_| self.inner.sample(&mut r)).collect()
    }

    fn contaminate(&self, shock: &PyMixture, epsilon: f64) -> PyResult<Self> {
        let inner = self
            .inner
            .contaminate(&shock.inner, epsilon)
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let p = self.inner.to_params();
        format!(
            "GaussianMixture(weights={:?}, means={:?}, sigmas={:?})",
            p.weights, p.means, p.sigmas
        )
    }
}

#[pyclass(name = "GmHmm", module = "pygmhmm", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGmHmm {
    inner: gmhmm::GmHmm,
}

#[pymethods]
impl PyGmHmm {
    #[new]
    fn new(
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
        emissions: Vec<PyMixture>,
    ) -> PyResult<Self> {
        let parts = gmhmm::ModelParts {
            transition,
            initial,
            emissions: emissions.iter().map(|e| e.inner.to_params()).collect(),
        };
        let inner = gmhmm::GmHmm::from_parts(&parts).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// The three-state reference model used throughout the test suite.
    #[staticmethod]
    fn reference() -> Self {
        Self {
            inner: fixtures::table_model(),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = io::model_from_json(text).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = io::read_model(path).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        io::model_to_json(&self.inner)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::write_model(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    #[getter]
    fn transition(&self) -> Vec<Vec<f64>> {
        self.inner
            .transition()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    #[getter]
    fn initial(&self) -> Vec<f64> {
        self.inner.initial().to_vec()
    }

    fn emission(&self, state: usize) -> PyResult<PyMixture> {
        let j = state_index(state, self.inner.n_states())?;
        Ok(PyMixture {
            inner: self.inner.emission(j).clone(),
        })
    }

    fn log_likelihood(&self, values: Vec<f64>) -> PyResult<f64> {
        let obs = ObservationSeries::new(values).map_err(py_err)?;
        self.inner.log_likelihood(&obs).map_err(py_err)
    }

    /// `T × N` smoothed state probabilities.
    fn state_posteriors(&self, values: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let obs = ObservationSeries::new(values).map_err(py_err)?;
        let g = self.inner.state_posteriors(&obs).map_err(py_err)?;
        Ok(g.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// List of `(state, value)` pairs.
    fn simulate(&self, steps: usize, seed: u64) -> Vec<(usize, f64)> {
        let path = self.inner.simulate(steps, &mut rng::seeded(seed));
        path.steps.iter().map(|s| (s.state + 1, s.value)).collect()
    }

    /// List of `(value, probability)` pairs.
    #[pyo3(signature = (count, seed, sort = false))]
    fn generate_fan(&self, count: usize, seed: u64, sort: bool) -> PyResult<Vec<(f64, f64)>> {
        let fan = scenario::generate_fan(&self.inner, count, &mut rng::seeded(seed), sort)
            .map_err(py_err)?;
        Ok(fan
            .scenarios
            .iter()
            .map(|s| (s.value, s.probability))
            .collect())
    }

    /// Tree in its JSON file form.
    #[pyo3(signature = (branching, seed, root_value = 0.0))]
    fn generate_tree(&self, branching: Vec<usize>, seed: u64, root_value: f64) -> PyResult<String> {
        let tree = scenario::generate_tree_with_root(
            &self.inner,
            &branching,
            root_value,
            &mut rng::seeded(seed),
        )
        .map_err(py_err)?;
        Ok(io::tree_to_json(&tree))
    }

    fn stress(
        &self,
        state: usize,
        shock_mean: f64,
        shock_sigma: f64,
        epsilon: f64,
    ) -> PyResult<Self> {
        let spec = StressSpec {
            target_state: state_index(state, self.inner.n_states())?,
            shock: gmhmm::GaussianMixture::single(shock_mean, shock_sigma).map_err(py_err)?,
            epsilon,
        };
        let inner = risk::stress_model(&self.inner, &spec).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!("GmHmm(n_states={})", self.inner.n_states())
    }
}

/// Fits a model to percentage log returns; returns `(model, report)`.
#[pyfunction]
#[pyo3(signature = (values, states = 3, components = 2, restarts = 10, tol = 1e-6, max_iter = 500, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn calibrate<'py>(
    py: Python<'py>,
    values: Vec<f64>,
    states: usize,
    components: usize,
    restarts: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PyResult<(PyGmHmm, Bound<'py, PyDict>)> {
    let obs = ObservationSeries::new(values).map_err(py_err)?;
    let config = gmhmm::CalibrationConfig {
        state_count: states,
        component_count: components,
        tolerance: tol,
        max_iterations: max_iter,
        restarts,
        seed,
        ..Default::default()
    };
    let (model, report) = py
        .detach(|| calibration::calibrate(&obs, &config))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("best_restart", report.best_restart + 1)?;
    d.set_item("iterations", report.iterations)?;
    d.set_item("converged", report.converged)?;
    d.set_item("log_likelihood", report.final_log_likelihood)?;
    d.set_item("parameter_count", report.parameter_count)?;
    d.set_item("aic", report.aic)?;
    let restarts: Vec<HashMap<&str, Option<f64>>> = report
        .restarts
        .iter()
        .map(|r| {
            HashMap::from([
                ("log_likelihood", r.final_log_likelihood),
                ("iterations", Some(r.iterations as f64)),
                ("converged", Some(f64::from(u8::from(r.converged)))),
            ])
        })
        .collect();
    d.set_item("restarts", restarts)?;
    Ok((PyGmHmm { inner: model }, d))
}

/// Composes `(name, weight, mixture)` factors into one mixture.
#[pyfunction]
fn compose_factors(factors: Vec<(String, f64, PyMixture)>) -> PyResult<PyMixture> {
    let specs: Vec<FactorSpec> = factors
        .into_iter()
        .map(|(name, weight, m)| FactorSpec {
            name,
            weight,
            mixture: m.inner,
        })
        .collect();
    let inner = risk::compose_factors(&specs).map_err(py_err)?;
    Ok(PyMixture { inner })
}

/// Percentage log returns `100 ln(I_t / I_{t-1})` of a level series.
#[pyfunction]
fn log_returns(levels: Vec<f64>) -> PyResult<Vec<f64>> {
    if let Some(bad) = levels.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(PyValueError::new_err(format!(
            "level {bad} must be positive"
        )));
    }
    let prices = PriceSeries {
        points: levels
            .into_iter()
            .map(|level| PricePoint { label: None, level })
            .collect(),
    };
    let obs = io::to_log_returns(&prices).map_err(py_err)?;
    Ok(obs.values().to_vec())
}

#[pyfunction]
#[pyo3(signature = (before, after, thresholds = vec![-5.0, 0.0]))]
fn impact_report<'py>(
    py: Python<'py>,
    before: &PyMixture,
    after: &PyMixture,
    thresholds: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = risk::impact_report(&before.inner, &after.inner, &thresholds);
    let d = PyDict::new(py);
    d.set_item("before", moments_dict(py, &r.before)?)?;
    d.set_item("after", moments_dict(py, &r.after)?)?;
    d.set_item("delta", moments_dict(py, &r.delta)?)?;
    let tails: Vec<(f64, f64, f64, f64)> = r
        .tails
        .iter()
        .map(|t| (t.threshold, t.before, t.after, t.ratio))
        .collect();
    d.set_item("tails", tails)?;
    Ok(d)
}

#[pymodule]
fn pygmhmm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMixture>()?;
    m.add_class::<PyGmHmm>()?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(compose_factors, m)?)?;
    m.add_function(wrap_pyfunction!(log_returns, m)?)?;
    m.add_function(wrap_pyfunction!(impact_report, m)?)?;
    Ok(())
}
