//! Python bindings. Matrices cross the boundary as lists of rows, vectors as lists.

use flatstep::calibration;
use flatstep::ellipsoid;
use flatstep::harness::{self, ConfigSource};
use flatstep::hodge::{self, Boundary, Complex2D};
use flatstep::logdet::{self, ProbeConfig, ProbeKind};
use flatstep::multistep::{self, MethodCoefficients as CoreCoeffs, SpectralMeasure as CoreMeasure};
use flatstep::operator::{self, OperatorPair};
use flatstep::stochastic::{self, NoiseModel};
use flatstep::{Error, Matrix, Vector};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(flatstep, FlatstepError, PyException);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(m) => PyValueError::new_err(m),
        other => FlatstepError::new_err(format!("{}: {other}", other.kind())),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn from_matrix(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

fn from_vector(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Coefficients `η_0..η_m`, `γ_1..γ_m` of a linear m-step method.
#[pyclass(name = "MethodCoefficients", module = "flatstep")]
#[derive(Clone)]
struct PyMethod {
    inner: CoreCoeffs,
}

#[pymethods]
impl PyMethod {
    #[new]
    fn new(eta: Vec<f64>, gamma: Vec<f64>) -> PyResult<Self> {
        CoreCoeffs::new(eta, gamma).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn m1(eta0: f64, eta1: f64, gamma1: f64) -> PyResult<Self> {
        CoreCoeffs::m1(eta0, eta1, gamma1).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn heavy_ball(alpha: f64, beta: f64) -> PyResult<Self> {
        CoreCoeffs::heavy_ball(alpha, beta).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    /// Characteristic roots at curvature `lam` as `(re, im)` pairs.
    fn roots(&self, lam: f64) -> Vec<(f64, f64)> {
        multistep::roots(&self.inner, lam).iter().map(|z| (z.re, z.im)).collect()
    }

    fn max_root_modulus(&self, lam: f64) -> f64 {
        multistep::max_root_modulus(&self.inner, lam)
    }

    /// `(schur_stable, rho_bar)` over a `grid`-point sweep of `[mu, l]`.
    fn stability(&self, mu: f64, l: f64, grid: usize) -> PyResult<(bool, f64)> {
        let r = multistep::stability_report(&self.inner, mu, l, grid).map_err(py_err)?;
        Ok((r.schur_stable, r.rho_bar))
    }

    /// `(rho, theta)` of the oscillatory m=1 mode, or `None` when the roots are real.
    fn decay_and_angle(&self, lam: f64) -> PyResult<Option<(f64, f64)>> {
        let mm = multistep::modal_multipliers_m1(&self.inner, lam).map_err(py_err)?;
        Ok(mm.rho.zip(mm.theta()))
    }

    fn trajectory(&self, lam: f64, state0: Vec<f64>, k: usize) -> PyResult<Vec<f64>> {
        multistep::modal_trajectory(&self.inner, lam, &state0, k).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("MethodCoefficients(eta={:?}, gamma={:?})", self.inner.eta(), self.inner.gamma())
    }
}

/// Atoms `(lambda, weight)` on `[mu, l]`.
#[pyclass(name = "SpectralMeasure", module = "flatstep")]
#[derive(Clone)]
struct PyMeasure {
    inner: CoreMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(atoms: Vec<(f64, f64)>, mu: f64, l: f64) -> PyResult<Self> {
        CoreMeasure::new(atoms, mu, l).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn from_eigenvalues(eigs: Vec<f64>) -> PyResult<Self> {
        CoreMeasure::from_eigenvalues(&eigs).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.atoms().to_vec()
    }
}

/// Symmetric drift `H` and diffusion `E`.
#[pyclass(name = "OperatorPair", module = "flatstep")]
#[derive(Clone)]
struct PyPair {
    inner: OperatorPair,
}

#[pymethods]
impl PyPair {
    #[new]
    fn new(h: Vec<Vec<f64>>, e: Vec<Vec<f64>>) -> PyResult<Self> {
        OperatorPair::new(to_matrix(h)?, to_matrix(e)?).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// `log Hol(h)` of the elementary rectangle.
    fn log_holonomy(&self, h: f64) -> PyResult<Vec<Vec<f64>>> {
        operator::holonomy(&self.inner, h).map(|r| from_matrix(&r.log_hol)).map_err(py_err)
    }

    /// Gauge generator `Z` with `[Z, S] = ½[H, E]`.
    fn gauge(&self) -> PyResult<Vec<Vec<f64>>> {
        calibration::gauge(&self.inner).map(|g| from_matrix(&g.z)).map_err(py_err)
    }

    fn step_a(&self, x: Vec<f64>, g: Vec<f64>, h: f64) -> PyResult<Vec<f64>> {
        let z = calibration::gauge(&self.inner).map_err(py_err)?.z;
        calibration::calibrated_step_a(&self.inner, &Vector::from_vec(x), &Vector::from_vec(g), h, &z)
            .map(|s| from_vector(&s.x_next))
            .map_err(py_err)
    }

    fn step_b(&self, x: Vec<f64>, g: Vec<f64>, h: f64) -> PyResult<Vec<f64>> {
        calibration::calibrated_step_b(&self.inner, &Vector::from_vec(x), &Vector::from_vec(g), h)
            .map(|s| from_vector(&s.x_next))
            .map_err(py_err)
    }

    #[pyo3(signature = (x, g, h, rho = 1.0))]
    fn filtered_step(&self, x: Vec<f64>, g: Vec<f64>, h: f64, rho: f64) -> PyResult<Vec<f64>> {
        calibration::curvature_filtered_step(&self.inner, &Vector::from_vec(x), &Vector::from_vec(g), h, rho)
            .map(|s| from_vector(&s.x_next))
            .map_err(py_err)
    }

    fn plain_step(&self, g: Vec<f64>, h: f64) -> PyResult<Vec<f64>> {
        calibration::plain_composite_step(&self.inner, &Vector::from_vec(g), h)
            .map(|s| from_vector(&s.x_next))
            .map_err(py_err)
    }
}

#[pyfunction]
fn expm(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    operator::expm(&to_matrix(a)?).map(|m| from_matrix(&m)).map_err(py_err)
}

#[pyfunction]
fn logm(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    operator::logm(&to_matrix(a)?).map(|m| from_matrix(&m)).map_err(py_err)
}

/// Returns `(h, order, lambda_hat, halvings)` for dense matrices `a`, `b`.
#[pyfunction]
#[pyo3(signature = (a, b, g, h_max = 1.0, sigma = 0.1, tau_diag = 1e-2))]
fn select_order(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, g: Vec<f64>, h_max: f64, sigma: f64, tau_diag: f64) -> PyResult<(f64, String, f64, usize)> {
    let (a, b) = (to_matrix(a)?, to_matrix(b)?);
    let sel = calibration::select_order(&|v| &a * v, &|v| &b * v, &Vector::from_vec(g), h_max, sigma, tau_diag, calibration::DEFAULT_MAX_HALVINGS)
        .map_err(py_err)?;
    Ok((sel.h, format!("{:?}", sel.order_chosen).to_lowercase(), sel.lambda_hat, sel.halvings))
}

#[pyfunction]
#[pyo3(signature = (coeffs, nu, sigma2, seed = 0))]
fn noise_floor(coeffs: &PyMethod, nu: &PyMeasure, sigma2: f64, seed: u64) -> PyResult<f64> {
    let noise = NoiseModel::uniform(sigma2, seed).map_err(py_err)?;
    stochastic::noise_floor(&coeffs.inner, &nu.inner, &noise).map_err(py_err)
}

/// `(mean, std_error)` of the simulated stationary objective.
#[pyfunction]
#[pyo3(signature = (coeffs, nu, sigma2, steps, seed = 0))]
fn empirical_floor(coeffs: &PyMethod, nu: &PyMeasure, sigma2: f64, steps: usize, seed: u64) -> PyResult<(f64, f64)> {
    let noise = NoiseModel::uniform(sigma2, seed).map_err(py_err)?;
    let p = stochastic::empirical_floor(&coeffs.inner, &nu.inner, &noise, steps).map_err(py_err)?;
    Ok((p.mean, p.std_error))
}

#[pyfunction]
fn logdet_chol(a: Vec<Vec<f64>>) -> PyResult<f64> {
    logdet::logdet_chol(&to_matrix(a)?).map_err(py_err)
}

/// `(estimate, stderr)` from stochastic Lanczos quadrature.
#[pyfunction]
#[pyo3(signature = (a, n_probes = 64, lanczos_steps = 0, seed = 0, gaussian = false))]
fn slq_logdet(a: Vec<Vec<f64>>, n_probes: usize, lanczos_steps: usize, seed: u64, gaussian: bool) -> PyResult<(f64, f64)> {
    let a = to_matrix(a)?;
    let steps = if lanczos_steps == 0 { a.nrows() } else { lanczos_steps };
    let kind = if gaussian { ProbeKind::Gaussian } else { ProbeKind::Rademacher };
    let cfg = ProbeConfig::new(n_probes, kind, seed, steps).map_err(py_err)?;
    let e = logdet::slq_logdet(&a, &cfg).map_err(py_err)?;
    Ok((e.estimate, e.stderr))
}

/// Ellipsoid method on a ball target; returns `(found, iterations, center)`.
#[pyfunction]
#[pyo3(signature = (center, radius, big_r, max_iter = 10_000))]
fn ellipsoid_ball(center: Vec<f64>, radius: f64, big_r: f64, max_iter: usize) -> PyResult<(bool, usize, Vec<f64>)> {
    let n = center.len();
    let oracle = ellipsoid::ball_oracle(Vector::from_vec(center), radius);
    let run = ellipsoid::run_feasibility(&oracle, &Vector::zeros(n), big_r, radius, max_iter).map_err(py_err)?;
    Ok((run.found, run.state.k, from_vector(&run.state.x)))
}

#[pyfunction]
fn ellipsoid_iteration_bound(n: usize, big_r: f64, r: f64) -> PyResult<usize> {
    ellipsoid::iteration_bound(n, big_r, r, 0.0).map_err(py_err)
}

/// `(sup_norm, nth_root_rate)` of the degree-`n` Chebyshev residual on `[mu, l]`.
#[pyfunction]
fn chebyshev(n: usize, mu: f64, l: f64) -> PyResult<(f64, f64)> {
    let f = multistep::chebyshev_filter(n, mu, l, 0.0, 3).map_err(py_err)?.filter;
    Ok((f.sup_norm(), f.nth_root_rate()))
}

/// Gauge reduction of the curvature cochain built from one pair per face;
/// returns `(energy, norm_squared, iterations)`.
#[pyfunction]
#[pyo3(signature = (n_t, n_s, pairs, h, periodic = false, tol = 1e-12, max_iter = 10_000))]
fn hodge_reduce(n_t: usize, n_s: usize, pairs: Vec<PyPair>, h: f64, periodic: bool, tol: f64, max_iter: usize) -> PyResult<(f64, f64, usize)> {
    let k = Complex2D::new(n_t, n_s, if periodic { Boundary::Periodic } else { Boundary::Free }).map_err(py_err)?;
    let pairs: Vec<OperatorPair> = pairs.into_iter().map(|p| p.inner).collect();
    let c = hodge::curvature_cochain(&k, &pairs, h).map_err(py_err)?;
    let red = hodge::gauge_reduce(&k, &c, tol, max_iter).map_err(py_err)?;
    Ok((red.energy, c.norm_squared(), red.iterations))
}

/// Names of the harness experiments.
#[pyfunction]
fn experiments() -> Vec<&'static str> {
    harness::Experiment::ALL.iter().map(|e| e.name()).collect()
}

/// Runs a harness experiment and returns its JSON summary as a string.
/// With `out` set, the CSV/JSON artifacts are also written.
#[pyfunction]
#[pyo3(signature = (name, params = Vec::new(), seed = 0, out = None))]
fn run_experiment(name: &str, params: Vec<String>, seed: u64, out: Option<String>) -> PyResult<String> {
    let src = ConfigSource {
        experiment: Some(name.to_string()),
        seed: Some(seed),
        out: out.clone(),
        params,
        ..Default::default()
    };
    let to_py = |e: harness::HarnessError| match e.exit_code() {
        2 => PyValueError::new_err(e.message()),
        _ => FlatstepError::new_err(e.to_string()),
    };
    let cfg = harness::parse_config(&src).map_err(to_py)?;
    let output = if out.is_some() {
        harness::run(&cfg).map_err(to_py)?.output
    } else {
        harness::execute(&cfg).map_err(to_py)?
    };
    Ok(harness::summary_json(&cfg, &output).to_string())
}

#[pymodule]
#[pyo3(name = "flatstep")]
fn flatstep_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FlatstepError", m.py().get_type::<FlatstepError>())?;
    m.add_class::<PyMethod>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyPair>()?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(logm, m)?)?;
    m.add_function(wrap_pyfunction!(select_order, m)?)?;
    m.add_function(wrap_pyfunction!(noise_floor, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_floor, m)?)?;
    m.add_function(wrap_pyfunction!(logdet_chol, m)?)?;
    m.add_function(wrap_pyfunction!(slq_logdet, m)?)?;
    m.add_function(wrap_pyfunction!(ellipsoid_ball, m)?)?;
    m.add_function(wrap_pyfunction!(ellipsoid_iteration_bound, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev, m)?)?;
    m.add_function(wrap_pyfunction!(hodge_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
