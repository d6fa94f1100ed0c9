//! Python bindings: thin wrappers over the core types and operations.
//!
//! Build as an extension module (`cargo build --release -p rde-py`) and
//! import the resulting shared library as `rde`; see `python/smoke_test.py`.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rde_core::cli;
use rde_core::limits;
use rde_core::maps;
use rde_core::montecarlo::{self, InitialLaw, QuenchMode, SimulationPlan};
use rde_core::observable;
use rde_core::transfer;
use rde_core::RdeError;

fn err(e: RdeError) -> PyErr {
    match e {
        RdeError::Domain(_)
        | RdeError::Index(_)
        | RdeError::InvalidSystem(_)
        | RdeError::Precondition(_)
        | RdeError::Config(_)
        | RdeError::DegenerateVariance(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A piecewise expanding map of the unit interval.
#[pyclass(name = "PiecewiseMap", frozen, from_py_object)]
#[derive(Clone)]
struct PyPiecewiseMap {
    inner: maps::PiecewiseMap,
}

#[pymethods]
impl PyPiecewiseMap {
    /// Integer beta map `x -> beta x mod 1`.
    #[staticmethod]
    fn beta(beta: u32) -> PyResult<PyPiecewiseMap> {
        Ok(PyPiecewiseMap {
            inner: maps::PiecewiseMap::beta(beta).map_err(err)?,
        })
    }

    /// `x -> slope x + offset mod 1` with real slope > 1.
    #[staticmethod]
    fn linear_mod1(slope: f64, offset: f64) -> PyResult<PyPiecewiseMap> {
        Ok(PyPiecewiseMap {
            inner: maps::PiecewiseMap::linear_mod1(slope, offset).map_err(err)?,
        })
    }

    /// Explicit affine branches `(lo, hi, slope, intercept)`.
    #[staticmethod]
    fn from_branches(branches: Vec<(f64, f64, f64, f64)>, label: String) -> PyResult<PyPiecewiseMap> {
        Ok(PyPiecewiseMap {
            inner: maps::PiecewiseMap::from_linear_branches(&branches, label).map_err(err)?,
        })
    }

    fn eval(&self, x: f64) -> PyResult<f64> {
        self.inner.eval(x).map_err(err)
    }

    /// Preimages of `x` as `(y, |T'(y)|)` pairs.
    fn preimages(&self, x: f64) -> PyResult<Vec<(f64, f64)>> {
        self.inner.preimages(x).map_err(err)
    }

    fn min_expansion(&self) -> f64 {
        self.inner.min_expansion()
    }

    fn preserves_lebesgue(&self) -> bool {
        self.inner.preserves_lebesgue(1e-9)
    }

    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn __repr__(&self) -> String {
        format!("PiecewiseMap({})", self.inner.label())
    }
}

/// A finite family of maps with an i.i.d. driving law.
#[pyclass(name = "RandomSystem", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRandomSystem {
    inner: Arc<maps::RandomSystem>,
}

#[pymethods]
impl PyRandomSystem {
    #[new]
    fn new(maps_in: Vec<PyPiecewiseMap>, probs: Vec<f64>) -> PyResult<PyRandomSystem> {
        let inner = maps::RandomSystem::new(
            maps_in.into_iter().map(|m| m.inner).collect(),
            probs,
        )
        .map_err(err)?;
        Ok(PyRandomSystem {
            inner: Arc::new(inner),
        })
    }

    fn expansion_in_mean(&self) -> f64 {
        self.inner.expansion_in_mean()
    }

    fn orbit_step(&self, x: f64, omega_index: usize) -> PyResult<f64> {
        self.inner.random_orbit_step(x, omega_index).map_err(err)
    }

    fn preserves_lebesgue(&self) -> bool {
        self.inner.preserves_lebesgue(1e-9)
    }

    fn n_maps(&self) -> usize {
        self.inner.n_maps()
    }

    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn __repr__(&self) -> String {
        format!("RandomSystem({})", self.inner.label())
    }
}

/// A bounded observable on `[0,1]`.
#[pyclass(name = "Observable", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyObservable {
    inner: Arc<observable::Observable>,
}

#[pymethods]
impl PyObservable {
    /// `coeff * cos(2 pi k x)`.
    #[staticmethod]
    fn cosine(k: u32, coeff: f64) -> PyObservable {
        PyObservable {
            inner: Arc::new(observable::Observable::cosine(k, coeff)),
        }
    }

    /// Terms from JSON, e.g.
    /// `[{"kind":"cosine","k":1,"coeff":1.0},{"kind":"indicator","lo":0.0,"hi":0.5,"coeff":1.0}]`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<PyObservable> {
        let specs: Vec<cli::TermSpec> = serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad term list: {e}")))?;
        let terms = specs
            .iter()
            .map(|t| {
                serde_json::to_value(t)
                    .ok()
                    .and_then(|_| Some(term_of(t)))
                    .unwrap()
            })
            .collect();
        Ok(PyObservable {
            inner: Arc::new(observable::Observable::new(terms).map_err(err)?),
        })
    }

    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    fn sup_bound(&self) -> f64 {
        self.inner.sup_bound()
    }

    /// Center against a stationary density.
    fn centered(&self, density: &PyStationaryDensity) -> PyObservable {
        PyObservable {
            inner: Arc::new(self.inner.centered(&density.inner)),
        }
    }

    fn label(&self) -> String {
        self.inner.label().to_string()
    }
}

fn term_of(spec: &cli::TermSpec) -> observable::Term {
    use observable::TermKind;
    match *spec {
        cli::TermSpec::Cosine { k, coeff } => observable::Term {
            kind: TermKind::Cosine(k),
            coefficient: coeff,
        },
        cli::TermSpec::Sine { k, coeff } => observable::Term {
            kind: TermKind::Sine(k),
            coefficient: coeff,
        },
        cli::TermSpec::Monomial { degree, coeff } => observable::Term {
            kind: TermKind::Monomial(degree),
            coefficient: coeff,
        },
        cli::TermSpec::Indicator { lo, hi, coeff } => observable::Term {
            kind: TermKind::Indicator { lo, hi },
            coefficient: coeff,
        },
    }
}

/// Cell-averaged stationary density.
#[pyclass(name = "StationaryDensity", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyStationaryDensity {
    inner: Arc<transfer::StationaryDensity>,
}

#[pymethods]
impl PyStationaryDensity {
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn grid_size(&self) -> usize {
        self.inner.grid_size()
    }

    fn residual(&self) -> f64 {
        self.inner.residual()
    }
}

/// Stationary density of the annealed Ulam operator.
#[pyfunction]
#[pyo3(signature = (system, grid, tol = 1e-12, max_iter = 100_000))]
fn stationary_density(
    system: &PyRandomSystem,
    grid: usize,
    tol: f64,
    max_iter: usize,
) -> PyResult<PyStationaryDensity> {
    let op = transfer::annealed_operator(&system.inner, grid).map_err(err)?;
    Ok(PyStationaryDensity {
        inner: Arc::new(transfer::stationary_density(&op, tol, max_iter).map_err(err)?),
    })
}

/// `(leading_eigenvalue, second_modulus, mixing)` of the annealed operator.
#[pyfunction]
fn spectral_gap(system: &PyRandomSystem, grid: usize) -> PyResult<(f64, f64, bool)> {
    let op = transfer::annealed_operator(&system.inner, grid).map_err(err)?;
    let h = transfer::stationary_density(&op, 1e-12, 100_000).map_err(err)?;
    let rep = transfer::spectral_gap(&op, &h).map_err(err)?;
    Ok((rep.leading_eigenvalue.re, rep.second_modulus, rep.is_mixing()))
}

/// The annealed Ulam operator in the RDE-SPARSE v1 text format.
#[pyfunction]
fn annealed_operator_text(system: &PyRandomSystem, grid: usize) -> PyResult<String> {
    let op = transfer::annealed_operator(&system.inner, grid).map_err(err)?;
    let mut buf = Vec::new();
    op.write_sparse_text(&mut buf).map_err(err)?;
    Ok(String::from_utf8(buf).expect("ascii output"))
}

/// Green–Kubo variance; returns a dict with the correlation series.
#[pyfunction]
#[pyo3(signature = (system, observable, grid, n_max = 200))]
fn green_kubo(
    py: Python<'_>,
    system: &PyRandomSystem,
    observable: &PyObservable,
    grid: usize,
    n_max: usize,
) -> PyResult<Py<PyDict>> {
    let est = limits::green_kubo_variance(&system.inner, &observable.inner, grid, n_max)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sigma2", est.sigma2)?;
    d.set_item("correlations", est.correlation_tail.clone())?;
    d.set_item("truncation_n", est.truncation_n)?;
    d.set_item("tail_bound", est.tail_bound)?;
    d.set_item("converged", est.converged)?;
    Ok(d.into())
}

/// `(lambda'(0), lambda''(0))` by the finite-difference stencil.
#[pyfunction]
fn variance_via_eigenvalue(
    system: &PyRandomSystem,
    observable: &PyObservable,
    grid: usize,
) -> PyResult<(f64, f64)> {
    limits::variance_via_eigenvalue(&system.inner, &observable.inner, grid).map_err(err)
}

/// Green–Kubo variance of `phi(x) - phi(y)` under the doubled system.
#[pyfunction]
#[pyo3(signature = (system, observable, grid = 128, n_max = 200))]
fn doubled_variance(
    system: &PyRandomSystem,
    observable: &PyObservable,
    grid: usize,
    n_max: usize,
) -> PyResult<f64> {
    limits::doubled_variance(&system.inner, &observable.inner, grid, n_max).map_err(err)
}

/// Tabulated log-MGF with a Legendre-transform evaluator.
#[pyclass(name = "RateFunction", frozen)]
struct PyRateFunction {
    inner: limits::RateFunction,
}

#[pymethods]
impl PyRateFunction {
    /// `(c(eps), theta_star, curvature)`.
    fn eval(&self, eps: f64) -> PyResult<(f64, f64, f64)> {
        let e = self.inner.eval(eps).map_err(err)?;
        Ok((e.c, e.theta_star, e.curvature))
    }

    fn theta_grid(&self) -> Vec<f64> {
        self.inner.theta_grid().to_vec()
    }

    fn logmgf(&self) -> Vec<f64> {
        self.inner.logmgf().to_vec()
    }

    fn sigma2(&self) -> f64 {
        self.inner.sigma2()
    }

    fn eps_max(&self) -> f64 {
        self.inner.eps_max()
    }
}

#[pyfunction]
#[pyo3(signature = (system, observable, grid, theta_max = 0.0, points = 201))]
fn rate_function(
    system: &PyRandomSystem,
    observable: &PyObservable,
    grid: usize,
    theta_max: f64,
    points: usize,
) -> PyResult<PyRateFunction> {
    let tm = if theta_max > 0.0 {
        theta_max
    } else {
        limits::default_theta_max(&observable.inner)
    };
    Ok(PyRateFunction {
        inner: limits::rate_function(&system.inner, &observable.inner, grid, tm, points)
            .map_err(err)?,
    })
}

/// Spectral radius of the imaginary-twisted operator over a frequency grid:
/// `(t, modulus, converged, flagged)` per point.
#[pyfunction]
fn aperiodicity_scan(
    system: &PyRandomSystem,
    observable: &PyObservable,
    t_grid: Vec<f64>,
    grid: usize,
) -> PyResult<Vec<(f64, f64, bool, bool)>> {
    let scan = limits::aperiodicity_scan(&system.inner, &observable.inner, &t_grid, grid)
        .map_err(err)?;
    Ok(scan
        .into_iter()
        .map(|p| (p.t, p.modulus, p.converged, p.flagged))
        .collect())
}

/// Martingale coboundary `(w, residual)`.
#[pyfunction]
#[pyo3(signature = (system, observable, grid, n_max = 400))]
fn martingale_coboundary(
    system: &PyRandomSystem,
    observable: &PyObservable,
    grid: usize,
    n_max: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let cb = limits::martingale_coboundary(&system.inner, &observable.inner, grid, n_max)
        .map_err(err)?;
    Ok((cb.w, cb.residual))
}

/// Seeded Birkhoff samples `S_n / sqrt(n)`.
#[pyfunction]
#[pyo3(signature = (system, observable, n, replicas, seed, initial = "lebesgue", point = 0.0, quench_seed = None))]
#[allow(clippy::too_many_arguments)]
fn birkhoff_samples(
    system: &PyRandomSystem,
    observable: &PyObservable,
    n: usize,
    replicas: usize,
    seed: u64,
    initial: &str,
    point: f64,
    quench_seed: Option<u64>,
) -> PyResult<Vec<f64>> {
    let law = match initial {
        "lebesgue" => InitialLaw::Lebesgue,
        "point" => InitialLaw::Point(point),
        "stationary" => {
            let op = transfer::annealed_operator(&system.inner, 1024).map_err(err)?;
            InitialLaw::Stationary(Arc::new(
                transfer::stationary_density(&op, 1e-12, 100_000).map_err(err)?,
            ))
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "initial law must be lebesgue|point|stationary, got {other:?}"
            )))
        }
    };
    let mut plan = SimulationPlan::new(
        system.inner.clone(),
        observable.inner.clone(),
        n,
        replicas,
        seed,
    )
    .with_initial_law(law);
    if let Some(q) = quench_seed {
        plan = plan.with_quench_mode(QuenchMode::Quenched { omega_seed: q });
    }
    Ok(montecarlo::birkhoff_samples(&plan).into_samples())
}

/// Kolmogorov–Smirnov statistic of samples against `N(0, sigma2)`.
#[pyfunction]
fn ks_vs_normal(samples: Vec<f64>, sigma2: f64) -> PyResult<f64> {
    let mut law = montecarlo::EmpiricalLaw::new(samples);
    law.ks_vs_normal(sigma2).map_err(err)
}

/// Kantorovich distance between sorted samples and a stationary density.
#[pyfunction]
fn kantorovich(samples: Vec<f64>, density: &PyStationaryDensity) -> PyResult<f64> {
    let mut sorted = samples;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    montecarlo::kantorovich(&sorted, &density.inner).map_err(err)
}

/// Run a JSON experiment config (same pipeline as `rde run`); returns the
/// CLI exit code (0 pass, 2 band failure).
#[pyfunction]
fn run_config(config_json: &str, out_dir: &str) -> PyResult<i32> {
    let cfg = cli::ExperimentConfig::from_json(config_json).map_err(err)?;
    let outcome = cli::run_config(&cfg, std::path::Path::new(out_dir)).map_err(err)?;
    Ok(if outcome.all_bands_passed { 0 } else { 2 })
}

/// Built-in families, observables and experiment kinds.
#[pyfunction]
fn list_builtins() -> String {
    cli::list_builtins()
}

#[pymodule]
fn rde(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPiecewiseMap>()?;
    m.add_class::<PyRandomSystem>()?;
    m.add_class::<PyObservable>()?;
    m.add_class::<PyStationaryDensity>()?;
    m.add_class::<PyRateFunction>()?;
    m.add_function(wrap_pyfunction!(stationary_density, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_gap, m)?)?;
    m.add_function(wrap_pyfunction!(annealed_operator_text, m)?)?;
    m.add_function(wrap_pyfunction!(green_kubo, m)?)?;
    m.add_function(wrap_pyfunction!(variance_via_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(doubled_variance, m)?)?;
    m.add_function(wrap_pyfunction!(rate_function, m)?)?;
    m.add_function(wrap_pyfunction!(aperiodicity_scan, m)?)?;
    m.add_function(wrap_pyfunction!(martingale_coboundary, m)?)?;
    m.add_function(wrap_pyfunction!(birkhoff_samples, m)?)?;
    m.add_function(wrap_pyfunction!(ks_vs_normal, m)?)?;
    m.add_function(wrap_pyfunction!(kantorovich, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(list_builtins, m)?)?;
    Ok(())
}
