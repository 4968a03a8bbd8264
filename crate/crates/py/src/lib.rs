//! Python bindings. Reports come back as plain dicts.

use merton_arena::nplayer::EquilibriumProfile;
use merton_arena::policy::ConsumptionPolicy;
use merton_arena::verification::{self, PerturbationGrid};
use merton_arena::{mfg, nplayer, policy, AgentType, Atom, Error, MfEquilibrium, Population, TypeDistribution};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_dict<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(json_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "AgentType", get_all, set_all, from_py_object)]
#[derive(Clone, Copy)]
struct PyAgent {
    x0: f64,
    delta: f64,
    theta: f64,
    eps: f64,
    mu: f64,
    nu: f64,
    sigma: f64,
}

impl From<PyAgent> for AgentType {
    fn from(a: PyAgent) -> Self {
        AgentType { x0: a.x0, delta: a.delta, theta: a.theta, eps: a.eps, mu: a.mu, nu: a.nu, sigma: a.sigma }
    }
}

#[pymethods]
impl PyAgent {
    #[new]
    #[pyo3(signature = (*, x0, delta, theta, eps, mu, sigma, nu = 0.0))]
    fn new(x0: f64, delta: f64, theta: f64, eps: f64, mu: f64, sigma: f64, nu: f64) -> PyResult<Self> {
        let a = PyAgent { x0, delta, theta, eps, mu, nu, sigma };
        AgentType::from(a).validate(0).map_err(err)?;
        Ok(a)
    }

    fn __repr__(&self) -> String {
        format!(
            "AgentType(x0={}, delta={}, theta={}, eps={}, mu={}, nu={}, sigma={})",
            self.x0, self.delta, self.theta, self.eps, self.mu, self.nu, self.sigma
        )
    }
}

#[pyclass(name = "Population")]
struct PyPopulation {
    inner: Population,
}

#[pymethods]
impl PyPopulation {
    #[new]
    fn new(horizon: f64, agents: Vec<PyAgent>) -> PyResult<Self> {
        let agents = agents.into_iter().map(AgentType::from).collect();
        Ok(PyPopulation { inner: Population::new(horizon, agents).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let p: Population = serde_json::from_str(text).map_err(json_err)?;
        Ok(PyPopulation { inner: Population::new(p.horizon, p.agents).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "TypeDistribution")]
struct PyDistribution {
    inner: TypeDistribution,
}

#[pymethods]
impl PyDistribution {
    /// `atoms` is a list of `(weight, AgentType)` pairs.
    #[new]
    fn new(horizon: f64, atoms: Vec<(f64, PyAgent)>) -> PyResult<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(weight, a)| Atom { weight, agent: a.into() })
            .collect();
        Ok(PyDistribution { inner: TypeDistribution::new(horizon, atoms).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let d: TypeDistribution = serde_json::from_str(text).map_err(json_err)?;
        d.validate().map_err(err)?;
        Ok(PyDistribution { inner: d })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }
}

#[pyclass(name = "Equilibrium")]
struct PyEquilibrium {
    inner: EquilibriumProfile,
}

#[pymethods]
impl PyEquilibrium {
    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi.clone()
    }
    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.inner.rho.clone()
    }
    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }
    #[getter]
    fn lambda_(&self) -> Vec<f64> {
        self.inner.lambda.clone()
    }
    #[getter]
    fn phi(&self) -> f64 {
        self.inner.aggregates.phi
    }
    #[getter]
    fn psi(&self) -> f64 {
        self.inner.aggregates.psi
    }
    #[getter]
    fn theta_crit(&self) -> Option<f64> {
        self.inner.theta_crit
    }

    /// Consumption rate of agent `i` at time `t`.
    fn consumption(&self, i: usize, t: f64) -> PyResult<f64> {
        self.policy(i)?.rate(t).map_err(err)
    }

    /// `int_t^T c_i`.
    fn cumulative_consumption(&self, i: usize, t: f64) -> PyResult<f64> {
        self.policy(i)?.cumulative(t).map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

impl PyEquilibrium {
    fn policy(&self, i: usize) -> PyResult<ConsumptionPolicy> {
        if i >= self.inner.len() {
            return Err(err(Error::AgentIndex { index: i, n: self.inner.len() }));
        }
        Ok(self.inner.policy(i))
    }
}

#[pyclass(name = "MfEquilibrium")]
struct PyMfEquilibrium {
    inner: MfEquilibrium,
}

#[pymethods]
impl PyMfEquilibrium {
    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi.clone()
    }
    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.inner.rho.clone()
    }
    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }
    #[getter]
    fn lambda_(&self) -> Vec<f64> {
        self.inner.lambda.clone()
    }
    #[getter]
    fn theta_crit(&self) -> Option<f64> {
        self.inner.theta_crit
    }
    #[getter]
    fn delta_eff(&self) -> Option<Vec<f64>> {
        self.inner.delta_eff.clone()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner)
    }
}

#[pyfunction]
fn solve_n(p: &PyPopulation) -> PyResult<PyEquilibrium> {
    Ok(PyEquilibrium { inner: nplayer::solve_n(&p.inner).map_err(err)? })
}

#[pyfunction]
fn solve_mf(d: &PyDistribution) -> PyResult<PyMfEquilibrium> {
    Ok(PyMfEquilibrium { inner: mfg::solve_mf(&d.inner).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (beta, lambda_, horizon, t))]
fn consumption_rate(beta: f64, lambda_: f64, horizon: f64, t: f64) -> PyResult<f64> {
    ConsumptionPolicy::new(beta, lambda_, horizon)
        .and_then(|c| c.rate(t))
        .map_err(err)
}

/// +1 increasing, -1 decreasing, 0 constant.
#[pyfunction]
#[pyo3(signature = (beta, lambda_))]
fn classify_regime(beta: f64, lambda_: f64) -> i8 {
    policy::classify_regime(beta, lambda_).code()
}

#[pyfunction]
#[pyo3(signature = (p, steps = verification::DEFAULT_ORACLE_STEPS))]
fn fixed_point_check<'py>(py: Python<'py>, p: &PyPopulation, steps: usize) -> PyResult<Bound<'py, PyAny>> {
    let e = nplayer::solve_n(&p.inner).map_err(err)?;
    let report = verification::fixed_point_check(&p.inner, &e, steps).map_err(err)?;
    to_dict(py, &report)
}

/// Scan the standard perturbation grid for one agent; raises on a
/// significant profitable deviation.
#[pyfunction]
#[pyo3(signature = (p, agent, steps = 1000, paths = 100_000, seed = 0))]
fn best_response_test<'py>(
    py: Python<'py>,
    p: &PyPopulation,
    agent: usize,
    steps: usize,
    paths: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let e = nplayer::solve_n(&p.inner).map_err(err)?;
    let grid = PerturbationGrid::standard();
    let report = py
        .detach(|| verification::best_response_test(&p.inner, &e, agent, &grid, steps, paths, seed))
        .map_err(err)?;
    to_dict(py, &report)
}

#[pyfunction]
fn mfg_convergence<'py>(py: Python<'py>, d: &PyDistribution, ns: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
    let table = verification::mfg_convergence(&d.inner, &ns).map_err(err)?;
    to_dict(py, &table)
}

#[pymodule]
#[pyo3(name = "merton_arena")]
fn merton_arena_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAgent>()?;
    m.add_class::<PyPopulation>()?;
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_class::<PyMfEquilibrium>()?;
    m.add_function(wrap_pyfunction!(solve_n, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mf, m)?)?;
    m.add_function(wrap_pyfunction!(consumption_rate, m)?)?;
    m.add_function(wrap_pyfunction!(classify_regime, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_check, m)?)?;
    m.add_function(wrap_pyfunction!(best_response_test, m)?)?;
    m.add_function(wrap_pyfunction!(mfg_convergence, m)?)?;
    Ok(())
}
