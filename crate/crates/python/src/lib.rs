//! Python bindings: registry problems, discrete algorithms, property suites,
//! ODE integration and Langevin sampling.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use vieq::diagnostics::{fit_series, RateModel};
use vieq::ode::{self, HighResVariant, Integrator, ScalingFunctions};
use vieq::optimize::{run_agd, run_gd, run_pgd, run_subgradient, PgdConfig};
use vieq::registry::{self, Instance};
use vieq::sample::{run_ula, run_underdamped, SampleTrace};
use vieq::suite::{run_suite, Suite};
use vieq::vi::{run_eg, run_forward, run_lookahead, run_ogda, run_ppm, LookaheadConfig, ResolventBackend};
use vieq::{ConstraintSet, Error, Point, RunTrace, ScalarProblem};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonFinite(_)
        | Error::NonFiniteState { .. }
        | Error::ResolventNotConverged { .. }
        | Error::Singular
        | Error::InsufficientData(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn point(x: Vec<f64>) -> PyResult<Point> {
    Point::new(x).map_err(py_err)
}

/// A named problem from the registry.
#[pyclass(frozen, module = "vieq_py")]
struct Problem {
    inner: Instance,
}

#[pymethods]
impl Problem {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(Problem { inner: registry::lookup(name).map_err(py_err)? })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.start.dim()
    }

    /// Default starting point.
    #[getter]
    fn start(&self) -> Vec<f64> {
        self.inner.start.as_slice().to_vec()
    }

    #[getter]
    fn has_objective(&self) -> bool {
        self.inner.objective.is_some()
    }

    /// Known minimizer or fixed point, if any.
    #[getter]
    fn solution(&self) -> Option<Vec<f64>> {
        match (&self.inner.objective, &self.inner.field) {
            (Some(p), _) => p.optimum().map(|o| o.x.as_slice().to_vec()),
            (None, Some(f)) => f.fixed_point().map(|z| z.as_slice().to_vec()),
            _ => None,
        }
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        let p = self.inner.objective().map_err(py_err)?;
        let x = point(x)?;
        p.check_dim(&x).map_err(py_err)?;
        Ok(p.value(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let p = self.inner.objective().map_err(py_err)?;
        Ok(p.gradient(&point(x)?).map_err(py_err)?.into_vec())
    }

    /// The operator F; the gradient field for objectives.
    fn field(&self, z: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = self.inner.field().map_err(py_err)?;
        let z = point(z)?;
        f.check_dim(&z).map_err(py_err)?;
        Ok(f.eval(&z).into_vec())
    }

    fn __repr__(&self) -> String {
        format!("Problem({:?})", self.inner.name)
    }
}

/// Iterates and error metrics of one algorithm run.
#[pyclass(frozen, module = "vieq_py")]
struct Trace {
    inner: RunTrace,
}

impl Trace {
    fn column(&self, f: impl Fn(&vieq::Record) -> Option<f64>) -> Vec<Option<f64>> {
        self.inner.records().iter().map(f).collect()
    }
}

#[pymethods]
impl Trace {
    #[getter]
    fn algorithm(&self) -> &str {
        &self.inner.config().algorithm
    }

    #[getter]
    fn step(&self) -> f64 {
        self.inner.config().step
    }

    #[getter]
    fn k(&self) -> Vec<usize> {
        self.inner.records().iter().map(|r| r.k).collect()
    }

    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.records().iter().map(|r| r.t).collect()
    }

    #[getter]
    fn dist_err(&self) -> Vec<Option<f64>> {
        self.column(|r| r.dist_err)
    }

    #[getter]
    fn f_err(&self) -> Vec<Option<f64>> {
        self.column(|r| r.f_err)
    }

    #[getter]
    fn grad_norm(&self) -> Vec<Option<f64>> {
        self.column(|r| r.grad_norm)
    }

    #[getter]
    fn iterates(&self) -> Vec<Vec<f64>> {
        self.inner.iterates().map(|x| x.as_slice().to_vec()).collect()
    }

    /// Iterations at which PGD injected a perturbation.
    #[getter]
    fn perturbations(&self) -> Vec<usize> {
        self.inner.perturbations().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace({} on {}, {} records)",
            self.inner.config().algorithm,
            self.inner.config().problem,
            self.inner.len()
        )
    }
}

fn resolvent(spec: &str) -> PyResult<ResolventBackend> {
    let bad = || PyValueError::new_err(format!("bad resolvent {spec:?}; valid: affine, picard[:TOL], series[:ORDER]"));
    let (kind, arg) = spec.split_once(':').map_or((spec, None), |(k, v)| (k, Some(v)));
    Ok(match (kind, arg) {
        ("affine", None) => ResolventBackend::ExactAffine,
        ("picard", tol) => ResolventBackend::FixedPointIter {
            tol: tol.map_or(Ok(1e-12), str::parse).map_err(|_| bad())?,
            max_inner: 10_000,
        },
        ("series", order) => {
            ResolventBackend::TruncatedSeries { order: order.map_or(Ok(20), str::parse).map_err(|_| bad())? }
        }
        _ => return Err(bad()),
    })
}

/// Run algorithm `alg` on registry problem `problem` for `iters` steps.
#[pyfunction]
#[pyo3(signature = (problem, alg, iters, eta=None, seed=0, x0=None, epsilon=1e-3, resolvent_backend="affine", inner_steps=2, alpha=0.25))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    problem: &str,
    alg: &str,
    iters: usize,
    eta: Option<f64>,
    seed: u64,
    x0: Option<Vec<f64>>,
    epsilon: f64,
    resolvent_backend: &str,
    inner_steps: usize,
    alpha: f64,
) -> PyResult<Trace> {
    let inst = registry::lookup(problem).map_err(py_err)?;
    let x0 = match x0 {
        Some(x) => point(x)?,
        None => inst.start.clone(),
    };
    let need_eta = || eta.ok_or_else(|| PyValueError::new_err(format!("{alg} needs eta")));
    let backend = resolvent(resolvent_backend)?;
    let obj = || inst.objective().map_err(py_err);
    let fld = || inst.field().map_err(py_err);
    let trace = match alg {
        "subgradient" => {
            let p = obj()?;
            py.detach(|| run_subgradient(p, &x0, iters, eta))
        }
        "gd" => {
            let p = obj()?;
            py.detach(|| run_gd(p, &x0, iters, eta))
        }
        "agd" => {
            let p = obj()?;
            py.detach(|| run_agd(p, &x0, iters, eta))
        }
        "pgd" => {
            let p = obj()?;
            let mut cfg = PgdConfig::from_epsilon(p, epsilon, seed).map_err(py_err)?;
            cfg.step = eta;
            py.detach(|| run_pgd(p, &x0, iters, &cfg))
        }
        "forward" => {
            let f = fld()?;
            py.detach(|| run_forward(f, &ConstraintSet::WholeSpace, &x0, iters, eta))
        }
        "ppm" => {
            let (f, s) = (fld()?, need_eta()?);
            py.detach(|| run_ppm(f, &x0, iters, s, backend))
        }
        "eg" => {
            let f = fld()?;
            py.detach(|| run_eg(f, &x0, iters, eta))
        }
        "ogda" => {
            let (f, s) = (fld()?, need_eta()?);
            py.detach(|| run_ogda(f, &x0, iters, s))
        }
        "la" => {
            let (f, s) = (fld()?, need_eta()?);
            py.detach(|| run_lookahead(f, &x0, iters, s, LookaheadConfig { inner_steps, alpha }))
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown algorithm {other:?}; valid: agd, eg, forward, gd, la, ogda, pgd, ppm, subgradient"
            )))
        }
    };
    Ok(Trace { inner: trace.map_err(py_err)? })
}

type CheckRow = (String, bool, f64);

/// Run a property suite. Returns (passed, [(name, passed, worst_slack), ...]).
#[pyfunction]
#[pyo3(signature = (suite="all", samples=1000, seed=0))]
fn check(py: Python<'_>, suite: &str, samples: usize, seed: u64) -> PyResult<(bool, Vec<CheckRow>)> {
    let s = Suite::parse(suite)
        .ok_or_else(|| PyValueError::new_err(format!("unknown suite {suite:?}; valid: {}", Suite::NAMES.join(", "))))?;
    let report = py.detach(|| run_suite(s, samples, seed, None)).map_err(py_err)?;
    let rows = report.checks.iter().map(|c| (c.name.clone(), c.passed, c.worst_slack)).collect();
    Ok((report.passed(), rows))
}

/// Sampled trajectory of a continuous-time dynamics.
#[pyclass(frozen, module = "vieq_py")]
struct Trajectory {
    #[pyo3(get)]
    name: String,
    #[pyo3(get)]
    t: Vec<f64>,
    #[pyo3(get)]
    x: Vec<Vec<f64>>,
    /// Velocities for second-order dynamics, else None.
    #[pyo3(get)]
    v: Option<Vec<Vec<f64>>>,
    /// Lyapunov energy for Bregman dynamics on problems with a known optimum.
    #[pyo3(get)]
    lyapunov: Option<Vec<f64>>,
}

#[pymethods]
impl Trajectory {
    fn __len__(&self) -> usize {
        self.t.len()
    }

    fn __repr__(&self) -> String {
        format!("Trajectory({}, {} samples)", self.name, self.t.len())
    }
}

/// Integrate `dynamics` (gradflow, nesterov, bregman:P, highres:VARIANT).
#[pyfunction]
#[pyo3(signature = (dynamics, t1, dt, problem=None, integrator="rk4", t0=None, eta=0.1, alpha=0.25, bregman_c=0.25))]
#[allow(clippy::too_many_arguments)]
fn integrate(
    py: Python<'_>,
    dynamics: &str,
    t1: f64,
    dt: f64,
    problem: Option<&str>,
    integrator: &str,
    t0: Option<f64>,
    eta: f64,
    alpha: f64,
    bregman_c: f64,
) -> PyResult<Trajectory> {
    let integ = match integrator {
        "euler" => Integrator::Euler,
        "rk4" => Integrator::Rk4,
        "leapfrog" => Integrator::Leapfrog,
        other => {
            return Err(PyValueError::new_err(format!("unknown integrator {other:?}; valid: euler, rk4, leapfrog")))
        }
    };
    let (kind, param) = dynamics.split_once(':').unwrap_or((dynamics, ""));
    let default = if kind == "highres" { "rotation" } else { "quadratic-cond100" };
    let inst = registry::lookup(problem.unwrap_or(default)).map_err(py_err)?;
    let dim = inst.start.dim();
    let mut v0 = None;
    let mut bregman = None;
    let d = match (kind, param) {
        ("gradflow", "") => ode::gradient_flow(inst.objective().map_err(py_err)?),
        ("nesterov", "") => ode::nesterov_ode(inst.objective().map_err(py_err)?),
        ("bregman", p) => {
            let pw: f64 =
                p.parse().map_err(|_| PyValueError::new_err(format!("bregman power must be a number, got {p:?}")))?;
            let f = inst.objective().map_err(py_err)?;
            let h = ScalarProblem::builder("half-sq-norm", dim, |x| 0.5 * x.norm_sq())
                .gradient(|x| x.clone())
                .hvp(|_, v| v.clone())
                .identity_hessian()
                .build()
                .map_err(py_err)?;
            let s = ScalingFunctions::polynomial(pw, bregman_c).map_err(py_err)?;
            let d = ode::bregman_el(f, &h, &s);
            bregman = Some((h, s));
            d
        }
        ("highres", v) => {
            let variant = HighResVariant::parse(v)
                .ok_or_else(|| PyValueError::new_err(format!("unknown highres variant {v:?}")))?;
            let f = inst.field().map_err(py_err)?;
            v0 = Some(ode::highres_initial_velocity(f, variant, alpha, &inst.start));
            ode::highres(f, variant, eta, alpha)
        }
        _ => return Err(PyValueError::new_err(format!("unknown dynamics {dynamics:?}"))),
    }
    .map_err(py_err)?;
    let second = d.order() == ode::Order::Second;
    let v0 = second.then(|| v0.unwrap_or_else(|| Point::zeros(dim)));
    let start = t0.unwrap_or(d.t0());
    let tr = py.detach(|| ode::integrate(&d, integ, start, t1, dt, &inst.start, v0.as_ref())).map_err(py_err)?;

    let lyapunov = match (&bregman, &inst.objective) {
        (Some((h, s)), Some(f)) if f.optimum().is_some() => Some(
            tr.samples
                .iter()
                .map(|p| ode::lyapunov(f, h, s, p.t, &p.x, p.v.as_ref().expect("second order")))
                .collect::<vieq::Result<Vec<f64>>>()
                .map_err(py_err)?,
        ),
        _ => None,
    };
    Ok(Trajectory {
        name: d.name().to_string(),
        t: tr.samples.iter().map(|s| s.t).collect(),
        x: tr.samples.iter().map(|s| s.x.as_slice().to_vec()).collect(),
        v: second.then(|| tr.samples.iter().map(|s| s.v.as_ref().expect("second order").as_slice().to_vec()).collect()),
        lyapunov,
    })
}

/// States of a Langevin chain.
#[pyclass(frozen, module = "vieq_py")]
struct Chain {
    inner: SampleTrace,
}

#[pymethods]
impl Chain {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.x(i).to_vec()).collect()
    }

    #[getter]
    fn v(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.has_velocity().then(|| (0..self.inner.len()).map(|i| self.inner.v(i).unwrap().to_vec()).collect())
    }

    #[pyo3(signature = (burn_in=0))]
    fn mean(&self, burn_in: usize) -> PyResult<Vec<f64>> {
        self.inner.mean(burn_in).map_err(py_err)
    }

    #[pyo3(signature = (burn_in=0))]
    fn variance(&self, burn_in: usize) -> PyResult<Vec<f64>> {
        self.inner.variance(burn_in).map_err(py_err)
    }

    #[pyo3(signature = (burn_in=0))]
    fn velocity_variance(&self, burn_in: usize) -> PyResult<Vec<f64>> {
        self.inner.velocity_variance(burn_in).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Run a Langevin chain (ula or underdamped) with potential `problem`.
#[pyfunction]
#[pyo3(signature = (chain, steps, delta, seed=0, problem="gaussian", friction=1.0, temperature=1.0))]
#[allow(clippy::too_many_arguments)]
fn sample(
    py: Python<'_>,
    chain: &str,
    steps: usize,
    delta: f64,
    seed: u64,
    problem: &str,
    friction: f64,
    temperature: f64,
) -> PyResult<Chain> {
    let inst = registry::lookup(problem).map_err(py_err)?;
    let u = inst.objective().map_err(py_err)?;
    let x0 = &inst.start;
    let tr = match chain {
        "ula" => py.detach(|| run_ula(u, x0, steps, delta, seed)),
        "underdamped" => {
            let v0 = Point::zeros(x0.dim());
            py.detach(|| run_underdamped(u, x0, &v0, steps, delta, friction, temperature, seed))
        }
        other => return Err(PyValueError::new_err(format!("unknown chain {other:?}; valid: ula, underdamped"))),
    };
    Ok(Chain { inner: tr.map_err(py_err)? })
}

/// Least-squares rate fit of (k, err) pairs; returns (estimate, intercept, residual).
/// `model` is "power" (err ≈ C k^s) or "linear" (err ≈ C r^k).
#[pyfunction]
#[pyo3(signature = (points, model="power"))]
fn fit_rate(points: Vec<(usize, f64)>, model: &str) -> PyResult<(f64, f64, f64)> {
    let m = match model {
        "power" => RateModel::Power,
        "linear" => RateModel::Linear,
        other => return Err(PyValueError::new_err(format!("unknown model {other:?}; valid: power, linear"))),
    };
    let fit = fit_series(&points, m).map_err(py_err)?;
    Ok((fit.estimate, fit.intercept, fit.residual))
}

/// Names accepted by Problem(), run(), integrate() and sample().
#[pyfunction]
fn problems() -> Vec<&'static str> {
    registry::NAMES.to_vec()
}

#[pymodule]
fn vieq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Trace>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Chain>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(problems, m)?)?;
    Ok(())
}
