//! Python bindings: scenarios, rate evaluation, threshold search and optimization.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use qrepeater::harness::{
    bisect_threshold, optimize, AxisScale, ContinuousAxis, DiscreteAxis, OptimizeSpec, Protocol, Scenario as CoreScenario,
    Threshold, ThresholdQuery, ThresholdTarget,
};
use qrepeater::{BellDiagonalState as CoreBell, Error, QkdProtocol, RateBreakdown};
use std::collections::{BTreeMap, HashMap};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Domain { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn rate_dict(rate: &RateBreakdown, diagnostic: Option<String>) -> HashMap<String, Option<f64>> {
    let mut out = HashMap::from([
        ("r_rep".to_string(), Some(rate.r_rep)),
        ("p_click".to_string(), Some(rate.p_click)),
        ("r_sift".to_string(), Some(rate.r_sift)),
        ("r_secret_fraction".to_string(), Some(rate.r_secret_fraction)),
        ("r_qkd".to_string(), Some(rate.r_qkd)),
        ("a_factor".to_string(), rate.a_factor),
    ]);
    if diagnostic.is_some() {
        out.insert("zero_rate".to_string(), Some(0.0));
    }
    out
}

/// Bell-diagonal two-qubit state with weights on phi+, psi+, psi-, phi-.
#[pyclass(name = "BellDiagonalState", from_py_object)]
#[derive(Clone)]
struct BellDiagonalState {
    inner: CoreBell,
}

#[pymethods]
impl BellDiagonalState {
    #[new]
    fn new(a: f64, b: f64, c: f64, d: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreBell::new(a, b, c, d).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn werner(fidelity: f64) -> PyResult<Self> {
        Ok(Self {
            inner: qrepeater::states::depolarized_state(fidelity).map_err(to_py)?,
        })
    }

    fn weights(&self) -> [f64; 4] {
        self.inner.weights()
    }

    fn fidelity(&self) -> f64 {
        self.inner.fidelity()
    }

    /// Error rates in the X, Z and Y bases.
    fn qber(&self) -> (f64, f64, f64) {
        let q = self.inner.qber();
        (q.e_x, q.e_z, q.e_y)
    }

    fn secret_fraction(&self, qkd: &str) -> PyResult<f64> {
        parse::<QkdProtocol>(qkd)?.secret_fraction(&self.inner.qber()).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let [a, b, c, d] = self.inner.weights();
        format!("BellDiagonalState({a}, {b}, {c}, {d})")
    }
}

/// A full parameter set for one protocol; parameters are addressed by name.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: CoreScenario,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (protocol, qkd = "bb84", **params))]
    fn new(protocol: &str, qkd: &str, params: Option<HashMap<String, f64>>) -> PyResult<Self> {
        let mut inner = CoreScenario::new(parse(protocol)?);
        inner.qkd = parse(qkd)?;
        for (name, value) in params.unwrap_or_default() {
            inner.set(&name, value).map_err(to_py)?;
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn parameter_names() -> Vec<&'static str> {
        qrepeater::harness::PARAMETER_NAMES.to_vec()
    }

    #[getter]
    fn protocol(&self) -> &'static str {
        self.inner.protocol.name()
    }

    #[getter]
    fn qkd(&self) -> &'static str {
        self.inner.qkd.name()
    }

    fn set(&mut self, name: &str, value: f64) -> PyResult<()> {
        self.inner.set(name, value).map_err(to_py)
    }

    fn get(&self, name: &str) -> PyResult<f64> {
        self.inner.get(name).map_err(to_py)
    }

    /// Rate decomposition; a `zero_rate` key marks a rate forced to zero.
    fn evaluate(&self) -> PyResult<HashMap<String, Option<f64>>> {
        let e = self.inner.evaluate().map_err(to_py)?;
        Ok(rate_dict(&e.rate, e.diagnostic))
    }

    fn secret_key_rate(&self) -> PyResult<f64> {
        Ok(self.inner.evaluate().map_err(to_py)?.rate.r_qkd)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(protocol={}, qkd={}, L={}, N={}, k={})",
            self.inner.protocol, self.inner.qkd.name(), self.inner.length, self.inner.nesting, self.inner.rounds
        )
    }
}

/// Smallest F0 (`target="F0"`) or p_G (`target="p_G"`) with a positive secret fraction.
///
/// Returns the threshold, `None` when every value works, and raises when none does.
#[pyfunction]
#[pyo3(signature = (protocol, target, n, k, qkd = "bb84", tol = 1e-6))]
fn threshold(protocol: &str, target: &str, n: u32, k: u32, qkd: &str, tol: f64) -> PyResult<Option<f64>> {
    let target = match target {
        "F0" => ThresholdTarget::InitialFidelity,
        "p_G" => ThresholdTarget::GateQuality,
        other => return Err(PyValueError::new_err(format!("unknown threshold target '{other}'"))),
    };
    let q = ThresholdQuery::new(parse::<Protocol>(protocol)?, target, n, k, parse(qkd)?);
    match bisect_threshold(&q, tol).map_err(to_py)? {
        Threshold::Value(v) => Ok(Some(v)),
        Threshold::NoConstraint => Ok(None),
        Threshold::Infeasible => Err(PyValueError::new_err("no value gives a positive secret fraction")),
    }
}

/// Maximize the secret key rate of `scenario`.
///
/// `continuous` maps names to `(lo, hi)` or `(lo, hi, scale)` with scale one of linear, log,
/// log-upper; `discrete` maps N or k to candidate values. Returns `(params, rates)`.
#[pyfunction]
#[pyo3(signature = (scenario, continuous = None, discrete = None, grid = 40))]
fn maximize(
    scenario: &Scenario,
    continuous: Option<HashMap<String, Vec<Bound<'_, PyAny>>>>,
    discrete: Option<HashMap<String, Vec<u32>>>,
    grid: usize,
) -> PyResult<(BTreeMap<String, f64>, HashMap<String, Option<f64>>)> {
    let mut spec = OptimizeSpec::new(scenario.inner.clone());
    spec.grid = grid;
    for (name, bounds) in continuous.unwrap_or_default() {
        let (lo, hi, scale) = match bounds.as_slice() {
            [lo, hi] => (lo.extract::<f64>()?, hi.extract::<f64>()?, AxisScale::Linear),
            [lo, hi, scale] => (lo.extract::<f64>()?, hi.extract::<f64>()?, parse(&scale.extract::<String>()?)?),
            _ => return Err(PyValueError::new_err(format!("bounds for {name} must be (lo, hi[, scale])"))),
        };
        spec = spec.continuous(ContinuousAxis::new(&name, lo, hi, scale).map_err(to_py)?);
    }
    for (name, values) in discrete.unwrap_or_default() {
        spec = spec.discrete(DiscreteAxis::new(&name, values).map_err(to_py)?);
    }
    let best = optimize(&spec).map_err(to_py)?;
    let rates = rate_dict(best.rate(), best.evaluation.diagnostic.clone());
    Ok((best.params, rates))
}

#[pymodule]
fn qrepeater_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BellDiagonalState>()?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(maximize, m)?)?;
    Ok(())
}
