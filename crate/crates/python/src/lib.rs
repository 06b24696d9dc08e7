//! Python bindings: parameters, geometry, operating points, Monte Carlo
//! estimates and the closed-form outage expressions.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use underlay_relay::analytic::{self, outage_breakdown};
use underlay_relay::experiments::{self, ExperimentConfig};
use underlay_relay::montecarlo::{D2PowerRule, ResolveOptions, Simulator};
use underlay_relay::{
    model, special, Error, OperatingPoint, Point, SchemePolicy, SystemParams, Topology,
};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(
    name = "SystemParams",
    module = "underlay_relay",
    frozen,
    from_py_object
)]
#[derive(Clone)]
struct PySystemParams {
    inner: SystemParams,
}

#[pymethods]
impl PySystemParams {
    /// SNRs are linear; use `db_to_linear` for dB values.
    #[new]
    #[pyo3(signature = (
        rate_primary = 0.8,
        rate_secondary = 0.2,
        outage_threshold = 0.1,
        snr_primary = 100.0,
        snr_relay_max = 100.0,
        pathloss_exponent = 4.0,
    ))]
    fn new(
        rate_primary: f64,
        rate_secondary: f64,
        outage_threshold: f64,
        snr_primary: f64,
        snr_relay_max: f64,
        pathloss_exponent: f64,
    ) -> PyResult<Self> {
        let inner = SystemParams::new(
            rate_primary,
            rate_secondary,
            outage_threshold,
            snr_primary,
            snr_relay_max,
            pathloss_exponent,
        )
        .map_err(py_err)?;
        Ok(PySystemParams { inner })
    }

    #[getter]
    fn rate_primary(&self) -> f64 {
        self.inner.rate_primary
    }
    #[getter]
    fn rate_secondary(&self) -> f64 {
        self.inner.rate_secondary
    }
    #[getter]
    fn outage_threshold(&self) -> f64 {
        self.inner.outage_threshold
    }
    #[getter]
    fn snr_primary(&self) -> f64 {
        self.inner.snr_primary
    }
    #[getter]
    fn snr_relay_max(&self) -> f64 {
        self.inner.snr_relay_max
    }
    #[getter]
    fn pathloss_exponent(&self) -> f64 {
        self.inner.pathloss_exponent
    }
    #[getter]
    fn lambda_primary(&self) -> f64 {
        self.inner.lambda_primary()
    }
    #[getter]
    fn lambda_secondary(&self) -> f64 {
        self.inner.lambda_secondary()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(rate_primary={}, rate_secondary={}, outage_threshold={}, snr_primary={}, snr_relay_max={}, pathloss_exponent={})",
            p.rate_primary, p.rate_secondary, p.outage_threshold, p.snr_primary, p.snr_relay_max, p.pathloss_exponent
        )
    }
}

#[pyclass(name = "Topology", module = "underlay_relay", frozen, from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: Topology,
}

fn point((x, y): (f64, f64)) -> Point {
    Point::new(x, y)
}

fn xy(p: Point) -> (f64, f64) {
    (p.x, p.y)
}

#[pymethods]
impl PyTopology {
    /// Node positions default to the reference layout.
    #[new]
    #[pyo3(signature = (relay = (0.5, 0.91), pt = None, st = None, pd = None, sd = None))]
    fn new(
        relay: (f64, f64),
        pt: Option<(f64, f64)>,
        st: Option<(f64, f64)>,
        pd: Option<(f64, f64)>,
        sd: Option<(f64, f64)>,
    ) -> PyResult<Self> {
        let mut t = Topology::reference(point(relay));
        if let Some(p) = pt {
            t.primary_tx = point(p);
        }
        if let Some(p) = st {
            t.secondary_tx = point(p);
        }
        if let Some(p) = pd {
            t.primary_rx = point(p);
        }
        if let Some(p) = sd {
            t.secondary_rx = point(p);
        }
        t.check_distinct().map_err(py_err)?;
        Ok(PyTopology { inner: t })
    }

    fn with_relay(&self, relay: (f64, f64)) -> PyResult<Self> {
        let inner = self.inner.with_relay(point(relay));
        inner.check_distinct().map_err(py_err)?;
        Ok(PyTopology { inner })
    }

    #[getter]
    fn relay(&self) -> (f64, f64) {
        xy(self.inner.relay)
    }
    #[getter]
    fn primary_tx(&self) -> (f64, f64) {
        xy(self.inner.primary_tx)
    }
    #[getter]
    fn secondary_tx(&self) -> (f64, f64) {
        xy(self.inner.secondary_tx)
    }
    #[getter]
    fn primary_rx(&self) -> (f64, f64) {
        xy(self.inner.primary_rx)
    }
    #[getter]
    fn secondary_rx(&self) -> (f64, f64) {
        xy(self.inner.secondary_rx)
    }

    /// Link variances `d^-β` keyed by link name ("pp", "ps", ...).
    fn variances<'py>(
        &self,
        py: Python<'py>,
        pathloss_exponent: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let v = model::link_variances(&self.inner, pathloss_exponent).map_err(py_err)?;
        let d = PyDict::new(py);
        for (k, x) in [
            ("pp", v.pp),
            ("ps", v.ps),
            ("pr", v.pr),
            ("sp", v.sp),
            ("ss", v.ss),
            ("sr", v.sr),
            ("rp", v.rp),
            ("rs", v.rs),
        ] {
            d.set_item(k, x)?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Topology(relay={:?})", xy(self.inner.relay))
    }
}

fn parse_policy(name: &str) -> PyResult<SchemePolicy> {
    name.parse().map_err(py_err)
}

/// Parameters, geometry and resolved transmit powers at one relay position.
#[pyclass(name = "OperatingPoint", module = "underlay_relay", frozen)]
struct PyOperatingPoint {
    inner: OperatingPoint,
}

#[pymethods]
impl PyOperatingPoint {
    #[new]
    #[pyo3(signature = (params, topology, d2_rule = "exact", alpha_draws = 100_000, alpha_seed = None))]
    fn new(
        py: Python<'_>,
        params: &PySystemParams,
        topology: &PyTopology,
        d2_rule: &str,
        alpha_draws: usize,
        alpha_seed: Option<u64>,
    ) -> PyResult<Self> {
        let mut opts = ResolveOptions {
            d2_rule: d2_rule.parse::<D2PowerRule>().map_err(py_err)?,
            alpha_draws,
            ..ResolveOptions::default()
        };
        if let Some(seed) = alpha_seed {
            opts.alpha_seed = seed;
        }
        let (p, t) = (params.inner, topology.inner);
        let inner = py
            .detach(|| OperatingPoint::resolve(&p, &t, &opts))
            .map_err(py_err)?;
        Ok(PyOperatingPoint { inner })
    }

    #[getter]
    fn secondary_power(&self) -> f64 {
        self.inner.powers.secondary
    }
    #[getter]
    fn relay_primary(&self) -> f64 {
        self.inner.powers.relay_primary
    }
    #[getter]
    fn relay_secondary(&self) -> f64 {
        self.inner.powers.relay_secondary
    }
    #[getter]
    fn relay_both(&self) -> f64 {
        self.inner.powers.relay_both
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.powers.alpha
    }
    #[getter]
    fn secondary_active(&self) -> bool {
        self.inner.secondary_active()
    }
    #[getter]
    fn assist_primary_feasible(&self) -> bool {
        self.inner.feasibility.assist_primary
    }
    #[getter]
    fn assist_both_feasible(&self) -> bool {
        self.inner.feasibility.assist_both
    }

    /// Closed-form decision probabilities and outage bounds of scheme 1.
    fn bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner;
        let b = outage_breakdown(
            &p.effective_snrs(),
            p.lambda_p,
            p.lambda_s,
            p.feasibility.assist_primary,
        )
        .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("p_decision", b.p_d.to_vec())?;
        d.set_item("cond_primary", b.cond_primary.to_vec())?;
        d.set_item("cond_secondary", b.cond_secondary.to_vec())?;
        d.set_item("total_primary", b.total_primary)?;
        d.set_item("total_secondary", b.total_secondary)?;
        Ok(d)
    }

    /// Monte Carlo outage for each policy name. Results are a function of
    /// `(seed, stream, trials)` only.
    #[pyo3(signature = (policies = None, trials = 100_000, seed = 1, workers = 0, stream = 0))]
    fn estimate<'py>(
        &self,
        py: Python<'py>,
        policies: Option<Vec<String>>,
        trials: u64,
        seed: u64,
        workers: usize,
        stream: u64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let policies = match policies {
            Some(names) => names
                .iter()
                .map(|n| parse_policy(n))
                .collect::<PyResult<Vec<_>>>()?,
            None => SchemePolicy::ALL.to_vec(),
        };
        let point = self.inner;
        let results = py
            .detach(|| Simulator::new(trials, seed, workers)?.estimate(&point, &policies, stream))
            .map_err(py_err)?;
        results
            .into_iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("policy", r.policy.name())?;
                d.set_item("secondary", r.secondary.p_hat)?;
                d.set_item("secondary_ci", r.secondary.half_width_95)?;
                d.set_item("primary", r.primary.p_hat)?;
                d.set_item("primary_ci", r.primary.half_width_95)?;
                d.set_item("decision_freq", r.secondary.decision_freq.to_vec())?;
                d.set_item("trials", r.secondary.trials)?;
                Ok(d)
            })
            .collect()
    }
}

#[pyfunction]
fn exp_integral(x: f64) -> PyResult<f64> {
    special::exp_integral(x).map_err(py_err)
}

#[pyfunction]
fn e1(z: f64) -> f64 {
    special::e1(z)
}

#[pyfunction]
fn db_to_linear(db: f64) -> f64 {
    model::db_to_linear(db)
}

#[pyfunction]
fn lambda_threshold(rate: f64) -> PyResult<f64> {
    model::lambda_threshold(rate).map_err(py_err)
}

/// `P((W + R)/(I + 1) < Λ)` for exponentials of the given means.
#[pyfunction]
fn relayed_outage_exact(direct: f64, interferer: f64, relay: f64, lam: f64) -> f64 {
    analytic::relayed_outage_exact(direct, interferer, relay, lam)
}

#[pyfunction]
fn cond_outage_d0(direct: f64, interferer: f64, lam: f64) -> f64 {
    analytic::cond_outage_d0(direct, interferer, lam)
}

#[pyfunction]
fn quotient_pdf(x: f64, num: f64, den: f64) -> f64 {
    analytic::quotient_pdf(x, num, den)
}

#[pyfunction]
fn quotient_cdf(x: f64, num: f64, den: f64) -> f64 {
    analytic::quotient_cdf(x, num, den)
}

/// Runs `sweep-snr`, `sweep-rate` or `grid-position` with `key=value`
/// overrides on the reference scenario and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (command, overrides = Vec::new()))]
fn run_sweep(py: Python<'_>, command: &str, overrides: Vec<String>) -> PyResult<String> {
    let sweep = match command {
        "sweep-snr" => experiments::sweep_snr,
        "sweep-rate" => experiments::sweep_rate,
        "grid-position" => experiments::grid_position,
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    };
    let mut cfg = ExperimentConfig::reference();
    for o in &overrides {
        cfg.apply_override(o).map_err(py_err)?;
    }
    py.detach(|| sweep(&cfg)?.to_csv_string()).map_err(py_err)
}

#[pymodule(name = "underlay_relay")]
fn underlay_relay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add(
        "POLICIES",
        SchemePolicy::ALL.map(SchemePolicy::name).to_vec(),
    )?;
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyOperatingPoint>()?;
    m.add_function(wrap_pyfunction!(exp_integral, m)?)?;
    m.add_function(wrap_pyfunction!(e1, m)?)?;
    m.add_function(wrap_pyfunction!(db_to_linear, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(relayed_outage_exact, m)?)?;
    m.add_function(wrap_pyfunction!(cond_outage_d0, m)?)?;
    m.add_function(wrap_pyfunction!(quotient_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(quotient_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
