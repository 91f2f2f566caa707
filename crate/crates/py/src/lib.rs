//! Python bindings for the `quantcons` consensus simulator and bounds.
//!
//! The extension module is imported as `quantcons`. Matrices come back as
//! lists of rows, ensemble statistics as plain dictionaries.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};
use serde_json::Value;

use quantcons::bounds::{self as qb, MseVariant, SupForm};
use quantcons::consensus::{self as qc, EnsembleOptions, RunConfig, RunStatus};
use quantcons::graph::{self as qg, LaplacianMatrix};
use quantcons::quantize::{self as qq, Quantized};
use quantcons::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::NotConnected(_) | Error::StepSizeTooLarge { .. } | Error::DivergentSeries(_) => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for quantcons::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_pyobject(py)?.into_any(),
            (None, Some(i)) => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a
                .iter()
                .map(|x| json_to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// Undirected simple graph on nodes 0..n.
#[pyclass(name = "Topology", module = "quantcons", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTopology(qg::Topology);

#[pymethods]
impl PyTopology {
    #[new]
    fn new(n_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        qg::Topology::new(n_nodes, edges).py().map(Self)
    }

    #[staticmethod]
    fn path(n: usize) -> Self {
        Self(qg::Topology::path(n))
    }

    #[staticmethod]
    fn ring(n: usize) -> PyResult<Self> {
        qg::Topology::ring(n).py().map(Self)
    }

    #[staticmethod]
    fn complete(n: usize) -> Self {
        Self(qg::Topology::complete(n))
    }

    #[staticmethod]
    fn circulant(n: usize, degree: usize) -> PyResult<Self> {
        qg::Topology::circulant(n, degree).py().map(Self)
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        qg::Topology::from_edge_list(text).py().map(Self)
    }

    fn to_edge_list(&self) -> String {
        self.0.to_edge_list()
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.0.n_nodes()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().to_vec()
    }

    fn degrees(&self) -> Vec<usize> {
        self.0.degrees()
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        qg::laplacian(&self.0).to_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(n_nodes={}, n_edges={})",
            self.0.n_nodes(),
            self.0.n_edges()
        )
    }
}

/// Random link-failure model over a base topology.
#[pyclass(
    name = "LinkFailureModel",
    module = "quantcons",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyModel(qg::LinkFailureModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn fixed(topology: &PyTopology) -> Self {
        Self(qg::LinkFailureModel::fixed(topology.0.clone()))
    }

    #[staticmethod]
    fn erasure(topology: &PyTopology, p_fail: f64) -> PyResult<Self> {
        qg::LinkFailureModel::erasure(topology.0.clone(), p_fail)
            .py()
            .map(Self)
    }

    #[staticmethod]
    fn gossip(topology: &PyTopology) -> Self {
        Self(qg::LinkFailureModel::gossip(topology.0.clone()))
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.0.n_nodes()
    }

    fn edge_probabilities(&self) -> Vec<f64> {
        self.0.edge_probabilities()
    }

    fn mean_laplacian(&self) -> PyResult<Vec<Vec<f64>>> {
        qg::mean_laplacian(&self.0).py().map(|l| l.to_rows())
    }

    /// Spectral summary of the mean Laplacian.
    fn spectral<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let s = qg::spectral(&qg::mean_laplacian(&self.0).py()?).py()?;
        serialize(py, &s)
    }
}

/// Spectral summary of a symmetric Laplacian given as rows.
#[pyfunction]
fn spectral<'py>(py: Python<'py>, rows: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    let l = LaplacianMatrix::from_rows(&rows).py()?;
    serialize(py, &qg::spectral(&l).py()?)
}

/// Uniform mid-tread quantizer, unbounded or with 2p+1 levels.
#[pyclass(
    name = "QuantizerSpec",
    module = "quantcons",
    frozen,
    skip_from_py_object
)]
#[derive(Clone, Copy)]
struct PyQuantizer(qq::QuantizerSpec);

#[pymethods]
impl PyQuantizer {
    #[new]
    #[pyo3(signature = (step, p=None))]
    fn new(step: f64, p: Option<u64>) -> PyResult<Self> {
        match p {
            Some(p) => qq::QuantizerSpec::finite(step, p),
            None => qq::QuantizerSpec::unbounded(step),
        }
        .py()
        .map(Self)
    }

    #[getter]
    fn step(&self) -> f64 {
        self.0.step()
    }

    #[getter]
    fn p(&self) -> Option<u64> {
        self.0.p()
    }

    #[getter]
    fn levels(&self) -> Option<u64> {
        self.0.levels()
    }

    #[getter]
    fn bit_rate(&self) -> Option<f64> {
        self.0.bit_rate()
    }

    /// q(y + nu), or None when a finite quantizer saturates.
    fn dithered(&self, y: f64, nu: f64) -> PyResult<Option<f64>> {
        Ok(match qq::dithered_quantize(y, nu, &self.0).py()? {
            Quantized::Value(v) => Some(v),
            Quantized::Saturated => None,
        })
    }

    fn __repr__(&self) -> String {
        match self.0.p() {
            Some(p) => format!("QuantizerSpec(step={}, p={p})", self.0.step()),
            None => format!("QuantizerSpec(step={})", self.0.step()),
        }
    }
}

#[pyfunction]
fn quantize(y: f64, delta: f64) -> PyResult<f64> {
    qq::quantize(y, delta).py()
}

/// `n` dither samples, uniform on [-step/2, step/2).
#[pyfunction]
fn dither_samples(seed: u64, step: f64, n: usize) -> PyResult<Vec<f64>> {
    let mut d = qq::DitherSource::new(seed, step).py()?;
    Ok((0..n).map(|_| d.sample()).collect())
}

/// alpha(i) = scale * a / (i+1)^tau, with an optional step schedule d0 * (i+1)^tau_d.
#[pyclass(
    name = "WeightSequence",
    module = "quantcons",
    frozen,
    skip_from_py_object
)]
#[derive(Clone, Copy)]
struct PyWeights(qc::WeightSequence);

#[pymethods]
impl PyWeights {
    #[new]
    #[pyo3(signature = (a, tau=1.0, scale=1.0, d0=None, tau_d=None))]
    fn new(a: f64, tau: f64, scale: f64, d0: Option<f64>, tau_d: Option<f64>) -> PyResult<Self> {
        let mut w = qc::WeightSequence::new(a, tau)
            .py()?
            .with_scale(scale)
            .py()?;
        if d0.is_some() || tau_d.is_some() {
            w = w
                .with_delta_schedule(d0.unwrap_or(1.0), tau_d.unwrap_or(0.0))
                .py()?;
        }
        Ok(Self(w))
    }

    fn alpha(&self, i: usize) -> f64 {
        self.0.alpha(i)
    }

    fn persistence<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.0.persistence_check())
    }
}

fn run_config(
    x0: Vec<f64>,
    model: &PyModel,
    weights: &PyWeights,
    quantizer: &PyQuantizer,
    max_iter: usize,
    b: Option<f64>,
    record_every: Option<usize>,
) -> RunConfig {
    let mut cfg = RunConfig::new(x0, model.0.clone(), weights.0, quantizer.0, max_iter);
    if let Some(b) = b {
        cfg = cfg.with_initial_bound(b);
    }
    if let Some(s) = record_every {
        cfg = cfg.with_record_every(s);
    }
    cfg
}

/// One QC run (unbounded quantizer) or QCF run (finite quantizer).
///
/// Returns a dict with `status`, `theta`, `saturated`, `final_state`,
/// `max_norm`, `iterations` and `trajectory`.
#[pyfunction]
#[pyo3(signature = (x0, model, weights, quantizer, max_iter, seed, b=None, record_every=None))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    x0: Vec<f64>,
    model: &PyModel,
    weights: &PyWeights,
    quantizer: &PyQuantizer,
    max_iter: usize,
    seed: u64,
    b: Option<f64>,
    record_every: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = run_config(x0, model, weights, quantizer, max_iter, b, record_every);
    let out = py
        .detach(|| {
            if cfg.quantizer.is_finite() {
                qc::run_qcf(&cfg, seed)
            } else {
                qc::run_qc(&cfg, seed)
            }
        })
        .py()?;
    let d = PyDict::new(py);
    let status = match out.status {
        RunStatus::Converged { .. } => "converged",
        RunStatus::MaxIterations { .. } => "max_iterations",
        RunStatus::Saturated { .. } => "saturated",
    };
    d.set_item("status", status)?;
    d.set_item("theta", out.theta())?;
    d.set_item("saturated", out.saturated())?;
    d.set_item("final_state", out.final_state.clone())?;
    d.set_item("max_norm", out.max_norm)?;
    d.set_item("iterations", out.iterations)?;
    match &out.trajectory {
        Some(t) => d.set_item("trajectory", serialize(py, t)?)?,
        None => d.set_item("trajectory", py.None())?,
    }
    Ok(d.into_any())
}

/// Monte Carlo ensemble; returns the statistics as a dict.
#[pyfunction]
#[pyo3(signature = (x0, model, weights, quantizer, max_iter, trials, seed, b=None, epsilon=None, checkpoints=None))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo<'py>(
    py: Python<'py>,
    x0: Vec<f64>,
    model: &PyModel,
    weights: &PyWeights,
    quantizer: &PyQuantizer,
    max_iter: usize,
    trials: usize,
    seed: u64,
    b: Option<f64>,
    epsilon: Option<f64>,
    checkpoints: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = run_config(x0, model, weights, quantizer, max_iter, b, None);
    if let Some(c) = checkpoints {
        cfg = cfg.with_checkpoints(c);
    }
    let opts = EnsembleOptions {
        epsilon,
        lyapunov: None,
    };
    let stats = py
        .detach(|| qc::monte_carlo(&cfg, trials, seed, &opts))
        .py()?;
    let d = serialize(py, &stats)?;
    let max_norms: Vec<f64> = stats.per_trial.iter().map(|t| t.max_norm).collect();
    let thetas: Vec<f64> = stats.per_trial.iter().map(|t| t.theta).collect();
    d.set_item("max_norms", max_norms)?;
    d.set_item("thetas", thetas)?;
    Ok(d)
}

/// Spectral and network quantities feeding every closed-form bound.
#[pyclass(
    name = "BoundInputs",
    module = "quantcons",
    frozen,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyBoundInputs(qb::BoundInputs);

#[pymethods]
impl PyBoundInputs {
    #[new]
    #[pyo3(signature = (model, delta, weights, b=None, p=None, epsilon=None))]
    fn new(
        model: &PyModel,
        delta: f64,
        weights: &PyWeights,
        b: Option<f64>,
        p: Option<u64>,
        epsilon: Option<f64>,
    ) -> PyResult<Self> {
        let mut inputs = qb::BoundInputs::from_model(&model.0, delta, weights.0).py()?;
        if let Some(b) = b {
            inputs = inputs.with_b(b);
        }
        if let Some(p) = p {
            inputs = inputs.with_p(p);
        }
        if let Some(e) = epsilon {
            inputs = inputs.with_epsilon(e);
        }
        Ok(Self(inputs))
    }

    fn with_delta(&self, delta: f64) -> Self {
        Self(self.0.clone().with_delta(delta))
    }

    fn with_p(&self, p: u64) -> Self {
        Self(self.0.clone().with_p(p))
    }

    #[getter]
    fn lambda2(&self) -> f64 {
        self.0.lambda2
    }

    #[getter]
    fn lambda_n(&self) -> f64 {
        self.0.lambda_n
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.0)
    }
}

fn report<'py>(
    py: Python<'py>,
    r: quantcons::Result<qb::BoundReport>,
) -> PyResult<Bound<'py, PyAny>> {
    let r = r.py()?;
    let d = PyDict::new(py);
    d.set_item("name", r.name)?;
    d.set_item("value", r.value)?;
    d.set_item("clamped", r.clamped)?;
    Ok(d.into_any())
}

/// variant: "general", "gossip", "refined" or "time_varying".
#[pyfunction]
#[pyo3(signature = (inputs, variant="general"))]
fn mse_bound<'py>(
    py: Python<'py>,
    inputs: &PyBoundInputs,
    variant: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let v = match variant {
        "general" => MseVariant::General,
        "gossip" => MseVariant::Gossip,
        "refined" => MseVariant::Refined,
        "time_varying" => MseVariant::TimeVarying,
        other => return Err(PyValueError::new_err(format!("unknown variant `{other}`"))),
    };
    report(py, qb::mse_bound(&inputs.0, v))
}

/// P[sup ||x(j)|| > a] bound over the b-ball.
#[pyfunction]
fn state_sup_bound<'py>(
    py: Python<'py>,
    a: f64,
    inputs: &PyBoundInputs,
) -> PyResult<Bound<'py, PyAny>> {
    report(py, qb::state_sup_bound(a, &inputs.0, SupForm::Ball))
}

#[pyfunction]
fn eps_consensus_lb<'py>(py: Python<'py>, inputs: &PyBoundInputs) -> PyResult<Bound<'py, PyAny>> {
    report(py, qb::eps_consensus_lb(&inputs.0))
}

#[pyfunction]
fn zero_rate_lb<'py>(py: Python<'py>, inputs: &PyBoundInputs) -> PyResult<Bound<'py, PyAny>> {
    report(py, qb::zero_rate_lb(&inputs.0))
}

#[pyfunction]
fn optimize_delta<'py>(py: Python<'py>, inputs: &PyBoundInputs) -> PyResult<Bound<'py, PyAny>> {
    let d = qb::optimize_delta(&inputs.0).py()?;
    serialize(py, &d)
}

#[pyfunction]
fn i_epsilon(inputs: &PyBoundInputs, varepsilon: f64) -> PyResult<usize> {
    qb::i_epsilon(&inputs.0, varepsilon).py()
}

#[pyfunction]
fn mss_bound(
    inputs: &PyBoundInputs,
    i: usize,
    varepsilon: f64,
    residual_at_i_eps: f64,
) -> PyResult<f64> {
    qb::mss_bound(&inputs.0, i, varepsilon, residual_at_i_eps).py()
}

#[pymodule]
#[pyo3(name = "quantcons")]
fn quantcons_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTopology>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyQuantizer>()?;
    m.add_class::<PyWeights>()?;
    m.add_class::<PyBoundInputs>()?;
    m.add_function(wrap_pyfunction!(spectral, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(dither_samples, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(mse_bound, m)?)?;
    m.add_function(wrap_pyfunction!(state_sup_bound, m)?)?;
    m.add_function(wrap_pyfunction!(eps_consensus_lb, m)?)?;
    m.add_function(wrap_pyfunction!(zero_rate_lb, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_delta, m)?)?;
    m.add_function(wrap_pyfunction!(i_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(mss_bound, m)?)?;
    Ok(())
}
