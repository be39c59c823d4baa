//! Seeded experiment runner behind the `flatstep` CLI.
//!
//! Every run writes `<out>.csv` (first line `# schema=<name>/v1`, then a header
//! and rows, floats with 17 significant digits) and `<out>.json` (inputs echo,
//! derived scalars and a `checks` array). Random streams come from SplitMix64;
//! per-replica seeds are `splitmix(base ^ index·0x9E3779B97F4A7C15)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::calibration::{adaptive_update, calibrated_step_a, calibrated_step_b, curvature_filtered_step, gauge, select_order};
use crate::ellipsoid::{bulk_shrink, iteration_bound, logdet_step, run_feasibility, Polytope};
use crate::error::Error;
use crate::hodge::{coboundary, Cochain, curvature_cochain, dense_reduce, gauge_reduce, Boundary, Complex2D};
use crate::linalg::{commutator, linspace, loglog_slope, logspace, spectral_norm, fit_slope, Matrix, Vector};
use crate::logdet::{hutchinson_trace, logdet_chol, residual_printed, slq_logdet, trust_region_update, MaContext, ProbeConfig, ProbeKind};
use crate::multistep::{chebyshev_filter, jury_endpoints_m1, modal_multipliers_m1, modal_trajectory, roots, MethodCoefficients, SpectralMeasure};
use crate::operator::{expm, OperatorPair};
use crate::rng;
use crate::stochastic::{empirical_floor, floor_upper_bound, lyap_vec, noise_floor, p11_closed_m1, psd_variance, stationary_plateau, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    CalibrateSlopes,
    OrderSelect,
    StabilityMap,
    DecayRinging,
    NoiseFloor,
    EllipsoidRun,
    LogdetBench,
    HodgeDemo,
    ChebyshevCompare,
    AdaptivePrecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Number,
    Integer,
    List,
    Text,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    /// Default as it would be written on the command line; `None` = required.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

macro_rules! p {
    ($name:expr, $kind:expr, $default:expr, $help:expr) => {
        ParamSpec { name: $name, kind: $kind, default: $default, help: $help }
    };
}

use ParamKind::{Integer as I, List as L, Number as N, Text as T};

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::CalibrateSlopes,
        Experiment::OrderSelect,
        Experiment::StabilityMap,
        Experiment::DecayRinging,
        Experiment::NoiseFloor,
        Experiment::EllipsoidRun,
        Experiment::LogdetBench,
        Experiment::HodgeDemo,
        Experiment::ChebyshevCompare,
        Experiment::AdaptivePrecond,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::CalibrateSlopes => "calibrate-slopes",
            Experiment::OrderSelect => "order-select",
            Experiment::StabilityMap => "stability-map",
            Experiment::DecayRinging => "decay-ringing",
            Experiment::NoiseFloor => "noise-floor",
            Experiment::EllipsoidRun => "ellipsoid-run",
            Experiment::LogdetBench => "logdet-bench",
            Experiment::HodgeDemo => "hodge-demo",
            Experiment::ChebyshevCompare => "chebyshev-compare",
            Experiment::AdaptivePrecond => "adaptive-precond",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn schema(self) -> String {
        format!("{}/v1", self.name().replace('-', "_"))
    }

    pub fn description(self) -> &'static str {
        match self {
            Experiment::CalibrateSlopes => "one-step error of plain, A, B and filtered steps vs h",
            Experiment::OrderSelect => "order diagnostic delta(h), stepsize selection and Armijo window",
            Experiment::StabilityMap => "Schur verdict and worst multiplier over an (eta0, gamma1) grid",
            Experiment::DecayRinging => "simulated m=1 mode: decay rate and ringing frequency",
            Experiment::NoiseFloor => "stationary variance three ways and Monte-Carlo floor",
            Experiment::EllipsoidRun => "central-cut ellipsoid on a random polytope with tau ledger",
            Experiment::LogdetBench => "Cholesky, SLQ and Hutchinson on a random SPD matrix",
            Experiment::HodgeDemo => "gauge reduction of a curvature cochain on a grid",
            Experiment::ChebyshevCompare => "Chebyshev residual sup-norm and N-th root rate",
            Experiment::AdaptivePrecond => "parallel-projection preconditioner updates",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Experiment::CalibrateSlopes => &["pair", "h", "err_plain", "err_a", "err_b", "err_filtered"],
            Experiment::OrderSelect => &["pair_kind", "h", "delta"],
            Experiment::StabilityMap => &["eta0", "gamma1", "stable", "rho_bar"],
            Experiment::DecayRinging => &["k", "y", "casorati"],
            Experiment::NoiseFloor => &["lambda", "weight", "p11_closed", "p11_lyap", "p11_psd", "plateau", "plateau_se"],
            Experiment::EllipsoidRun => &["k", "logdet_p", "delta_log_tau", "switched", "switch_jump"],
            Experiment::LogdetBench => &["method", "lanczos_steps", "estimate", "stderr", "exact", "rel_error"],
            Experiment::HodgeDemo => &["face", "i", "j", "c_norm2", "harmonic_norm2"],
            Experiment::ChebyshevCompare => &["n", "sup_grid", "sup_exact", "nth_root_rate", "target_rate", "gd_rate", "max_extremum_dev"],
            Experiment::AdaptivePrecond => &["k", "commutator_norm", "inverse_form_gap", "printed_form_gap", "dist_to_target"],
        }
    }

    pub fn params(self) -> &'static [ParamSpec] {
        match self {
            Experiment::CalibrateSlopes => &[
                p!("dim", I, Some("8"), "matrix dimension"),
                p!("pairs", I, Some("5"), "number of random noncommuting pairs"),
                p!("h_min", N, Some("1e-3"), "smallest step"),
                p!("h_max", N, Some("1e-1"), "largest step"),
                p!("n_h", I, Some("9"), "log-spaced steps"),
                p!("rho", N, Some("1.0"), "filtered-step safeguard"),
            ],
            Experiment::OrderSelect => &[
                p!("dim", I, Some("6"), "matrix dimension"),
                p!("h_min", N, Some("1e-3"), "smallest step for the delta sweep"),
                p!("h_max", N, Some("1e-1"), "largest step for the delta sweep"),
                p!("n_h", I, Some("9"), "log-spaced steps"),
                p!("sigma", N, Some("0.1"), "Armijo parameter in (0, 1/2)"),
                p!("tau_diag", N, Some("1e-2"), "order diagnostic tolerance"),
                p!("x_samples", I, Some("100"), "random points for the Armijo window"),
            ],
            Experiment::StabilityMap => &[
                p!("eta1", N, None, "fixed eta1"),
                p!("mu", N, Some("0.1"), "lower curvature"),
                p!("L", N, Some("1.0"), "upper curvature"),
                p!("grid", I, Some("200"), "points per axis"),
                p!("lambda_grid", I, Some("101"), "curvature samples"),
                p!("eta0_max", N, Some("4.0"), "eta0 range is [0, eta0_max/L]"),
            ],
            Experiment::DecayRinging => &[
                p!("eta0", N, Some("0.5"), "eta0"),
                p!("eta1", N, Some("0.1"), "eta1"),
                p!("gamma1", N, Some("0.9"), "gamma1"),
                p!("lambda", N, Some("1.0"), "mode curvature"),
                p!("k_max", I, Some("200"), "steps"),
                p!("window_lo", I, Some("100"), "start of the decay window"),
            ],
            Experiment::NoiseFloor => &[
                p!("eta0", N, Some("0.5"), "eta0"),
                p!("eta1", N, Some("0.1"), "eta1"),
                p!("gamma1", N, Some("0.6"), "gamma1"),
                p!("sigma2", N, Some("0.01"), "noise variance"),
                p!("atoms", L, Some("0.2,0.6,1.0"), "curvature atoms (unit weight)"),
                p!("steps", I, Some("1000000"), "measured Monte-Carlo steps per atom"),
                p!("n_omega", I, Some("16384"), "PSD quadrature points"),
            ],
            Experiment::EllipsoidRun => &[
                p!("n", I, Some("2"), "dimension"),
                p!("R", N, Some("10.0"), "initial ball radius"),
                p!("r", N, Some("0.5"), "inner ball radius of the target"),
                p!("faces", I, Some("0"), "polytope faces (0 = 3n)"),
                p!("max_iter", I, Some("10000"), "iteration cap"),
            ],
            Experiment::LogdetBench => &[
                p!("dim", I, Some("32"), "matrix dimension"),
                p!("n_probes", I, Some("256"), "probes"),
                p!("lanczos_steps", I, Some("0"), "Lanczos steps (0 = dim)"),
                p!("probe_kind", T, Some("rademacher"), "rademacher or gaussian"),
                p!("lambda_min", N, Some("0.5"), "smallest eigenvalue"),
                p!("lambda_max", N, Some("50.0"), "largest eigenvalue"),
                p!("eta", N, Some("0.01"), "trust-region rate; |1 − dim·eta| < 1 contracts"),
            ],
            Experiment::HodgeDemo => &[
                p!("n_t", I, Some("8"), "faces along t"),
                p!("n_s", I, Some("6"), "faces along s"),
                p!("d", I, Some("3"), "matrix dimension"),
                p!("periodic", I, Some("1"), "1 = torus, 0 = planar"),
                p!("h", N, Some("0.1"), "holonomy step"),
                p!("tol", N, Some("1e-12"), "CG relative residual"),
                p!("max_iter", I, Some("5000"), "CG iteration cap"),
            ],
            Experiment::ChebyshevCompare => &[
                p!("mu", N, Some("1.0"), "lower curvature"),
                p!("L", N, Some("100.0"), "upper curvature"),
                p!("degrees", L, Some("10,50,100,200,400,800"), "polynomial degrees"),
                p!("grid", I, Some("20001"), "evaluation grid"),
            ],
            Experiment::AdaptivePrecond => &[
                p!("dim", I, Some("6"), "matrix dimension"),
                p!("eta", N, Some("0.2"), "H rate"),
                p!("zeta", N, Some("0.2"), "E rate"),
                p!("iters", I, Some("20"), "updates"),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub params: BTreeMap<String, ParamValue>,
    pub out_path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HarnessError {
    Validation(String),
    Numerical(Error),
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::Io(_) => 2,
            HarnessError::Numerical(Error::InvalidInput(_)) => 2,
            HarnessError::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Validation(_) => "ValidationError",
            HarnessError::Io(_) => "IoError",
            HarnessError::Numerical(e) => e.kind(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            HarnessError::Validation(m) | HarnessError::Io(m) => m.clone(),
            HarnessError::Numerical(e) => e.to_string(),
        }
    }

    /// Single-line JSON record for standard error.
    pub fn record(&self, experiment: Option<&str>) -> String {
        json!({
            "level": "error",
            "kind": self.kind(),
            "exit": self.exit_code(),
            "experiment": experiment,
            "message": self.message(),
        })
        .to_string()
    }
}

impl std::fmt::Display for HarnessError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for HarnessError {}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        HarnessError::Numerical(e)
    }
}

type HResult<T> = std::result::Result<T, HarnessError>;

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}

/// Command-line overrides applied on top of an optional JSON config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    pub file: Option<PathBuf>,
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    /// Raw `key=value` strings.
    pub params: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    seed: Option<u64>,
    out_path: Option<String>,
    #[serde(default)]
    params: BTreeMap<String, ParamValue>,
}

fn parse_inline(spec: &ParamSpec, raw: &str) -> HResult<ParamValue> {
    let num = |s: &str| -> HResult<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("parameter '{}': '{s}' is not a number", spec.name)))
    };
    Ok(match spec.kind {
        ParamKind::Number | ParamKind::Integer => ParamValue::Number(num(raw)?),
        ParamKind::List => ParamValue::List(raw.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<HResult<_>>()?),
        ParamKind::Text => ParamValue::Text(raw.to_string()),
    })
}

fn validate(spec: &ParamSpec, v: &ParamValue) -> HResult<()> {
    let ok = match (spec.kind, v) {
        (ParamKind::Number, ParamValue::Number(x)) => x.is_finite(),
        (ParamKind::Integer, ParamValue::Number(x)) => x.is_finite() && x.fract() == 0.0 && *x >= 0.0,
        (ParamKind::List, ParamValue::List(xs)) => !xs.is_empty() && xs.iter().all(|x| x.is_finite()),
        (ParamKind::Text, ParamValue::Text(_)) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("parameter '{}' expects {:?}, got {}", spec.name, spec.kind, serde_json::to_string(v).unwrap_or_default())))
    }
}

/// Builds a validated config: file values first, then flags. Unknown keys and
/// missing required parameters are errors.
pub fn parse_config(src: &ConfigSource) -> HResult<ExperimentConfig> {
    let raw: RawConfig = match &src.file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?
        }
        None => RawConfig::default(),
    };
    let name = src
        .experiment
        .clone()
        .or(raw.experiment)
        .ok_or_else(|| invalid("no experiment given"))?;
    let experiment = Experiment::from_name(&name).ok_or_else(|| invalid(format!("unknown experiment '{name}'")))?;
    let specs = experiment.params();
    let find = |key: &str| specs.iter().find(|s| s.name == key).ok_or_else(|| invalid(format!("unknown parameter '{key}' for {name}")));

    let mut params = BTreeMap::new();
    for (k, v) in raw.params {
        let spec = find(&k)?;
        // Integers and numbers arrive from JSON as numbers; lists may be given as a single number.
        let v = match (spec.kind, v) {
            (ParamKind::List, ParamValue::Number(x)) => ParamValue::List(vec![x]),
            (_, v) => v,
        };
        validate(spec, &v)?;
        params.insert(k, v);
    }
    for kv in &src.params {
        let (k, v) = kv.split_once('=').ok_or_else(|| invalid(format!("expected key=value, got '{kv}'")))?;
        let spec = find(k.trim())?;
        let value = parse_inline(spec, v)?;
        validate(spec, &value)?;
        params.insert(spec.name.to_string(), value);
    }
    for spec in specs {
        if !params.contains_key(spec.name) {
            match spec.default {
                Some(d) => {
                    params.insert(spec.name.to_string(), parse_inline(spec, d)?);
                }
                None => return Err(invalid(format!("missing required parameter '{}' for {name}", spec.name))),
            }
        }
    }
    Ok(ExperimentConfig {
        experiment,
        seed: src.seed.or(raw.seed).unwrap_or(0),
        params,
        out_path: src.out.clone().or(raw.out_path).unwrap_or_else(|| format!("flatstep-{name}")),
    })
}

impl ExperimentConfig {
    fn get(&self, key: &str) -> HResult<&ParamValue> {
        self.params.get(key).ok_or_else(|| invalid(format!("missing parameter '{key}'")))
    }

    pub fn num(&self, key: &str) -> HResult<f64> {
        match self.get(key)? {
            ParamValue::Number(x) => Ok(*x),
            _ => Err(invalid(format!("parameter '{key}' is not a number"))),
        }
    }

    pub fn int(&self, key: &str) -> HResult<usize> {
        let x = self.num(key)?;
        if x.fract() != 0.0 || x < 0.0 {
            return Err(invalid(format!("parameter '{key}' must be a nonnegative integer")));
        }
        Ok(x as usize)
    }

    pub fn list(&self, key: &str) -> HResult<Vec<f64>> {
        match self.get(key)? {
            ParamValue::List(xs) => Ok(xs.clone()),
            ParamValue::Number(x) => Ok(vec![*x]),
            _ => Err(invalid(format!("parameter '{key}' is not a list"))),
        }
    }

    pub fn text(&self, key: &str) -> HResult<String> {
        match self.get(key)? {
            ParamValue::Text(s) => Ok(s.clone()),
            _ => Err(invalid(format!("parameter '{key}' is not text"))),
        }
    }

    pub fn csv_path(&self) -> PathBuf {
        PathBuf::from(format!("{}.csv", self.out_path))
    }

    pub fn json_path(&self) -> PathBuf {
        PathBuf::from(format!("{}.json", self.out_path))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

/// Floats as 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format_float(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value <= threshold, value, threshold, "value <= threshold")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<Vec<Cell>>,
    pub derived: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    fn derive(&mut self, key: &str, v: impl Into<Value>) {
        self.derived.insert(key.to_string(), v.into());
    }
}

pub fn render_csv(experiment: Experiment, rows: &[Vec<Cell>]) -> String {
    let mut out = format!("# schema={}\n{}\n", experiment.schema(), experiment.columns().join(","));
    for row in rows {
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn summary_json(config: &ExperimentConfig, output: &ExperimentOutput) -> Value {
    let derived: serde_json::Map<String, Value> = output.derived.clone().into_iter().collect();
    json!({
        "schema": config.experiment.schema(),
        "experiment": config.experiment.name(),
        "inputs": config,
        "derived": derived,
        "checks": output.checks,
        "all_checks_passed": output.checks.iter().all(|c| c.passed),
    })
}

/// Runs the experiment without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> HResult<ExperimentOutput> {
    match config.experiment {
        Experiment::CalibrateSlopes => calibrate_slopes(config),
        Experiment::OrderSelect => order_select(config),
        Experiment::StabilityMap => stability_map(config),
        Experiment::DecayRinging => decay_ringing(config),
        Experiment::NoiseFloor => noise_floor_experiment(config),
        Experiment::EllipsoidRun => ellipsoid_run(config),
        Experiment::LogdetBench => logdet_bench(config),
        Experiment::HodgeDemo => hodge_demo(config),
        Experiment::ChebyshevCompare => chebyshev_compare(config),
        Experiment::AdaptivePrecond => adaptive_precond(config),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub output: ExperimentOutput,
}

fn write_file(path: &Path, text: &str) -> HResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

/// Executes and writes the CSV and JSON artifacts.
pub fn run(config: &ExperimentConfig) -> HResult<RunArtifacts> {
    let output = execute(config)?;
    let csv = config.csv_path();
    let json_path = config.json_path();
    write_file(&csv, &render_csv(config.experiment, &output.rows))?;
    let summary = serde_json::to_string_pretty(&summary_json(config, &output)).map_err(|e| HarnessError::Io(e.to_string()))?;
    write_file(&json_path, &(summary + "\n"))?;
    Ok(RunArtifacts {
        csv,
        json: json_path,
        output,
    })
}

/// Exit code for a run; errors are printed as one JSON line on standard error.
pub fn run_exit_code(config: &ExperimentConfig) -> i32 {
    match run(config) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("{}", e.record(Some(config.experiment.name())));
            e.exit_code()
        }
    }
}

// ---------------------------------------------------------------------------
// Shared measurement kernels (also used by the acceptance suite).

/// Random symmetric pair with `‖H‖₂ = ‖E‖₂ = 1`.
pub fn random_normalized_pair(r: &mut rng::FlatRng, dim: usize) -> crate::Result<OperatorPair> {
    let h = rng::symmetric_matrix(r, dim);
    let e = rng::symmetric_matrix(r, dim);
    let (hn, en) = (spectral_norm(&h), spectral_norm(&e));
    OperatorPair::new(h / hn, e / en)
}

/// One-step errors `[plain, A, B, filtered]` at step `h` from `x`.
///
/// References: `W(I − hS)W⁻¹x` with `W = expm(hZ)` for the plain composite
/// `(I−hE)(I−hH)x`, Variant A (`ĝ = 0`) and Variant B (`ĝ = x`); the reverse
/// form `W⁻¹(I − hS)Wx` for the curvature-filtered step, evaluated on the
/// step-scaled pair with unit step.
pub fn calibration_errors(pair: &OperatorPair, z: &Matrix, x: &Vector, h: f64, rho: f64) -> crate::Result<[f64; 4]> {
    let n = pair.dim();
    let id = Matrix::identity(n, n);
    let w = expm(&(z * h))?;
    let w_inv = expm(&(z * -h))?;
    let lin = &id - pair.sum() * h;
    let forward = &w * &lin * &w_inv * x;
    let reverse = &w_inv * &lin * &w * x;
    let plain = (&id - pair.diffusion() * h) * ((&id - pair.drift() * h) * x);
    let a = calibrated_step_a(pair, x, &Vector::zeros(n), h, z)?.x_next;
    let b = calibrated_step_b(pair, x, x, h)?.x_next;
    let f = curvature_filtered_step(&pair.scaled(h), x, x, 1.0, rho)?.x_next;
    Ok([
        (plain - &forward).norm(),
        (a - &forward).norm(),
        (b - &forward).norm(),
        (f - reverse).norm(),
    ])
}

/// `δ(h) = ‖(I−hB)(I−hA)g − (I−hA)(I−hB)g‖ / (h‖g‖)`.
pub fn order_delta(a: &Matrix, b: &Matrix, g: &Vector, h: f64) -> f64 {
    let ag = g - a * g * h;
    let u1 = &ag - b * &ag * h;
    let bg = g - b * g * h;
    let u2 = &bg - a * &bg * h;
    (u1 - u2).norm() / (h * g.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmijoReport {
    /// Points × steps tested.
    pub tested: usize,
    /// Failures of the gradient step `x − hSx`.
    pub linear_violations: usize,
    /// Failures of either composite order, which agrees with `x − hSx` to `O(h²)`.
    pub composite_violations: usize,
    /// Smallest `(bound − f(u)) / f(x)` over the composite steps.
    pub worst_margin: f64,
}

/// Checks `f(u) ≤ f(x) − σh‖Sx‖²` for `f = ½⟨Sx,x⟩`, `S = A + B`, with `u`
/// the gradient step and both composite orders `(I−hB)(I−hA)x`, `(I−hA)(I−hB)x`,
/// at each `h` in `hs`.
pub fn armijo_window(a: &Matrix, b: &Matrix, xs: &[Vector], hs: &[f64], sigma: f64) -> ArmijoReport {
    let s = a + b;
    let n = s.nrows();
    let id = Matrix::identity(n, n);
    let f = |v: &Vector| 0.5 * v.dot(&(&s * v));
    let mut report = ArmijoReport {
        tested: 0,
        linear_violations: 0,
        composite_violations: 0,
        worst_margin: f64::INFINITY,
    };
    for &h in hs {
        let dr = (&id - b * h) * (&id - a * h);
        let rd = (&id - a * h) * (&id - b * h);
        for x in xs {
            let fx = f(x);
            let sx = &s * x;
            let bound = fx - sigma * h * sx.norm_squared();
            let slack = 1e-12 * fx.abs();
            report.tested += 1;
            if f(&(x - &sx * h)) > bound + slack {
                report.linear_violations += 1;
            }
            let mut failed = false;
            for step in [&dr, &rd] {
                let margin = bound - f(&(step * x));
                report.worst_margin = report.worst_margin.min(margin / fx.abs().max(1e-300));
                failed |= margin < -slack;
            }
            report.composite_violations += failed as usize;
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayMeasurement {
    pub trajectory: Vec<f64>,
    /// `y_k² − y_{k−1}y_{k+1}`, which equals `|c|² sin²ϑ ρ^{2k}` for a single
    /// damped oscillation.
    pub casorati: Vec<f64>,
    pub rho2_predicted: f64,
    pub rho2_measured: f64,
    pub freq_predicted: f64,
    pub freq_measured: f64,
    pub bin_width: f64,
}

/// Simulates the noise-free mode from `[1, 1]` for `k_max` steps and measures
/// the per-step decay of the squared amplitude over `[window_lo, k_max]` and
/// the FFT peak frequency of `y_0 … y_{k_max−1}`.
pub fn measure_decay_ringing(coeffs: &MethodCoefficients, lambda: f64, k_max: usize, window_lo: usize) -> crate::Result<DecayMeasurement> {
    if window_lo + 4 > k_max {
        return Err(Error::InvalidInput("decay window needs at least 4 points".into()));
    }
    let mm = modal_multipliers_m1(coeffs, lambda)?;
    let theta = mm
        .theta()
        .ok_or_else(|| Error::OutOfDomain(format!("λ = {lambda} is not an oscillatory mode")))?;
    let mut y = vec![1.0];
    y.extend(modal_trajectory(coeffs, lambda, &[1.0, 1.0], k_max)?);
    let casorati: Vec<f64> = (1..k_max).map(|k| y[k] * y[k] - y[k - 1] * y[k + 1]).collect();
    let (ks, logs): (Vec<f64>, Vec<f64>) = (window_lo..k_max)
        .filter_map(|k| {
            let c = casorati[k - 1];
            (c > 0.0).then(|| (k as f64, c.ln()))
        })
        .unzip();
    let rho2_measured = fit_slope(&ks, &logs).exp();

    let n = k_max;
    let mut buf: Vec<Complex64> = y[..n].iter().map(|v| Complex64::new(*v, 0.0)).collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let peak = (1..=n / 2)
        .max_by(|&i, &j| buf[i].norm().partial_cmp(&buf[j].norm()).unwrap())
        .unwrap_or(0);
    Ok(DecayMeasurement {
        trajectory: y,
        casorati,
        rho2_predicted: mm.rho.unwrap().powi(2),
        rho2_measured,
        freq_predicted: theta / (2.0 * std::f64::consts::PI),
        freq_measured: peak as f64 / n as f64,
        bin_width: 1.0 / n as f64,
    })
}

// ---------------------------------------------------------------------------
// Experiments.

fn calibrate_slopes(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let (dim, pairs, n_h) = (cfg.int("dim")?, cfg.int("pairs")?, cfg.int("n_h")?);
    let (h_min, h_max, rho) = (cfg.num("h_min")?, cfg.num("h_max")?, cfg.num("rho")?);
    if dim < 2 || pairs < 1 || n_h < 3 || !(h_min > 0.0 && h_min < h_max) || !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid("need dim ≥ 2, pairs ≥ 1, n_h ≥ 3, 0 < h_min < h_max, rho ∈ (0, 1]"));
    }
    let hs = logspace(h_min, h_max, n_h);
    let mut out = ExperimentOutput::default();
    let mut slopes: [Vec<f64>; 4] = Default::default();
    for k in 0..pairs {
        let mut r = rng::rng(rng::derive_seed(cfg.seed, k as u64));
        let pair = random_normalized_pair(&mut r, dim)?;
        let z = gauge(&pair)?.z;
        let x = rng::unit_vector(&mut r, dim);
        let mut errs: [Vec<f64>; 4] = Default::default();
        for &h in &hs {
            let e = calibration_errors(&pair, &z, &x, h, rho)?;
            out.rows.push(vec![k.into(), h.into(), e[0].into(), e[1].into(), e[2].into(), e[3].into()]);
            for i in 0..4 {
                errs[i].push(e[i]);
            }
        }
        for i in 0..4 {
            slopes[i].push(loglog_slope(&hs, &errs[i]));
        }
    }
    let names = ["plain", "a", "b", "filtered"];
    let targets = [2.0, 3.0, 3.0, 3.0];
    for i in 0..4 {
        let worst = slopes[i].iter().map(|s| (s - targets[i]).abs()).fold(0.0, f64::max);
        out.derive(&format!("slopes_{}", names[i]), slopes[i].clone());
        out.checks.push(Check::new(
            &format!("slope_{}", names[i]),
            worst <= 0.15,
            worst,
            0.15,
            format!("max |slope − {}| over pairs", targets[i]),
        ));
    }
    Ok(out)
}

fn order_select(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let (dim, n_h, x_samples) = (cfg.int("dim")?, cfg.int("n_h")?, cfg.int("x_samples")?);
    let (h_min, h_max, sigma, tau) = (cfg.num("h_min")?, cfg.num("h_max")?, cfg.num("sigma")?, cfg.num("tau_diag")?);
    if dim < 2 || n_h < 3 || !(h_min > 0.0 && h_min < h_max) || !(sigma > 0.0 && sigma < 0.5) || !(tau > 0.0) {
        return Err(invalid("need dim ≥ 2, n_h ≥ 3, 0 < h_min < h_max, sigma ∈ (0, 1/2), tau_diag > 0"));
    }
    let mut r = rng::rng(cfg.seed);
    let hs = logspace(h_min, h_max, n_h);
    let q = rng::orthogonal_matrix(&mut r, dim);
    let diag = |r: &mut rng::FlatRng| {
        Matrix::from_diagonal(&Vector::from_fn(dim, |_, _| rng::uniform(r, 0.5, 2.0)))
    };
    let comm_a = &q * diag(&mut r) * q.transpose();
    let comm_b = &q * diag(&mut r) * q.transpose();
    let spd = |r: &mut rng::FlatRng| {
        let eigs: Vec<f64> = (0..dim).map(|_| rng::uniform(r, 0.5, 2.0)).collect();
        rng::spd_with_spectrum(r, &eigs)
    };
    let (a, b) = (spd(&mut r), spd(&mut r));
    let g = rng::unit_vector(&mut r, dim);

    let mut out = ExperimentOutput::default();
    let mut deltas_nc = Vec::new();
    let mut max_comm: f64 = 0.0;
    for &h in &hs {
        let dc = order_delta(&comm_a, &comm_b, &g, h);
        let dn = order_delta(&a, &b, &g, h);
        max_comm = max_comm.max(dc);
        deltas_nc.push(dn);
        out.rows.push(vec!["commuting".into(), h.into(), dc.into()]);
        out.rows.push(vec!["noncommuting".into(), h.into(), dn.into()]);
    }
    let slope = loglog_slope(&hs, &deltas_nc);
    let (aa, bb) = (a.clone(), b.clone());
    let sel = select_order(&|v| &aa * v, &|v| &bb * v, &g, 1.0, sigma, tau, crate::calibration::DEFAULT_MAX_HALVINGS)?;
    let lam_max = crate::linalg::sym_eigen(&(&a + &b))?.eigenvalues.max();
    let edge = 2.0 * (1.0 - sigma) / lam_max;
    let xs: Vec<Vector> = (0..x_samples).map(|_| rng::normal_vector(&mut r, dim)).collect();
    let mut window = vec![edge, 0.5 * edge];
    if sel.h <= edge {
        window.push(sel.h);
    }
    let armijo = armijo_window(&a, &b, &xs, &window, sigma);

    out.derive("delta_slope_noncommuting", slope);
    out.derive("max_delta_commuting", max_comm);
    out.derive("selected_h", sel.h);
    out.derive("lambda_hat", sel.lambda_hat);
    out.derive("halvings", sel.halvings);
    out.derive("order_chosen", format!("{:?}", sel.order_chosen).to_lowercase());
    out.derive("armijo_window_edge", edge);
    out.derive("armijo_tested", armijo.tested);
    out.derive("armijo_linear_violations", armijo.linear_violations);
    out.derive("armijo_composite_violations", armijo.composite_violations);
    out.checks.push(Check::new("delta_slope_noncommuting", (slope - 1.0).abs() <= 0.1, slope, 0.1, "|slope − 1|"));
    out.checks.push(Check::at_most("delta_commuting_zero", max_comm, 1e-12));
    out.checks.push(Check::at_most("armijo_linear_violations", armijo.linear_violations as f64, 0.0));
    out.checks.push(Check::at_most("armijo_composite_violations", armijo.composite_violations as f64, 0.0));
    Ok(out)
}

fn stability_map(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let (eta1, mu, l, eta0_max) = (cfg.num("eta1")?, cfg.num("mu")?, cfg.num("L")?, cfg.num("eta0_max")?);
    let (grid, lam_grid) = (cfg.int("grid")?, cfg.int("lambda_grid")?);
    if !(mu > 0.0 && mu <= l) || grid < 2 || lam_grid < 2 || !(eta0_max > 0.0) {
        return Err(invalid("need 0 < mu ≤ L, grid ≥ 2, lambda_grid ≥ 2, eta0_max > 0"));
    }
    let lams = linspace(mu, l, lam_grid);
    let mut out = ExperimentOutput::default();
    let (mut stable_count, mut certificate_mismatch) = (0usize, 0usize);
    for g1 in linspace(0.0, 1.0 - 1.0 / grid as f64, grid) {
        for e0 in linspace(0.0, eta0_max / l, grid) {
            let c = MethodCoefficients::m1(e0, eta1, g1)?;
            let mut rho_bar: f64 = 0.0;
            for &lam in &lams {
                rho_bar = rho_bar.max(modal_multipliers_m1(&c, lam)?.rho_max);
            }
            let stable = rho_bar < 1.0 - 1e-12;
            stable_count += stable as usize;
            if jury_endpoints_m1(&c, mu, l)? && !stable {
                certificate_mismatch += 1;
            }
            out.rows.push(vec![e0.into(), g1.into(), stable.into(), rho_bar.into()]);
        }
    }
    // Spot check the closed-form multipliers against companion eigenvalues.
    let mut r = rng::rng(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let c = MethodCoefficients::m1(rng::uniform(&mut r, 0.0, eta0_max / l), eta1, rng::uniform(&mut r, 0.0, 1.0))?;
        let lam = rng::uniform(&mut r, mu, l);
        let mut a = modal_multipliers_m1(&c, lam)?.roots;
        let mut b = roots(&c, lam);
        let key = |z: &Complex64| (z.re, z.im);
        a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).norm());
        }
    }
    out.derive("stable_fraction", stable_count as f64 / (grid * grid) as f64);
    out.derive("closed_form_vs_companion", worst);
    out.checks.push(Check::at_most("jury_certificate_implies_grid_stability", certificate_mismatch as f64, 0.0));
    out.checks.push(Check::at_most("closed_form_vs_companion", worst, 1e-12));
    Ok(out)
}

fn decay_ringing(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let c = MethodCoefficients::m1(cfg.num("eta0")?, cfg.num("eta1")?, cfg.num("gamma1")?)?;
    let lam = cfg.num("lambda")?;
    let m = measure_decay_ringing(&c, lam, cfg.int("k_max")?, cfg.int("window_lo")?)?;
    let mut out = ExperimentOutput::default();
    for (k, y) in m.trajectory.iter().enumerate() {
        let cas = if k >= 1 && k < m.trajectory.len() - 1 { m.casorati[k - 1] } else { f64::NAN };
        out.rows.push(vec![k.into(), (*y).into(), cas.into()]);
    }
    let rel = (m.rho2_measured - m.rho2_predicted).abs() / m.rho2_predicted;
    let fgap = (m.freq_measured - m.freq_predicted).abs();
    out.derive("rho2_predicted", m.rho2_predicted);
    out.derive("rho2_measured", m.rho2_measured);
    out.derive("freq_predicted", m.freq_predicted);
    out.derive("freq_measured", m.freq_measured);
    out.derive("bin_width", m.bin_width);
    out.checks.push(Check::at_most("decay_rate_rel_error", rel, 0.01));
    out.checks.push(Check::at_most("ringing_frequency_gap", fgap, m.bin_width));
    Ok(out)
}

fn noise_floor_experiment(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let c = MethodCoefficients::m1(cfg.num("eta0")?, cfg.num("eta1")?, cfg.num("gamma1")?)?;
    let sigma2 = cfg.num("sigma2")?;
    let atoms = cfg.list("atoms")?;
    let (steps, n_omega) = (cfg.int("steps")?, cfg.int("n_omega")?);
    let mu = atoms.iter().cloned().fold(f64::INFINITY, f64::min);
    let l = atoms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nu = SpectralMeasure::new(atoms.iter().map(|&a| (a, 1.0)).collect(), mu, l)?;
    let noise = NoiseModel::uniform(sigma2, cfg.seed)?;
    let mut out = ExperimentOutput::default();
    let (mut worst_closed, mut worst_psd): (f64, f64) = (0.0, 0.0);
    for (i, &lam) in atoms.iter().enumerate() {
        let closed = p11_closed_m1(&c, lam, sigma2)?;
        let lyap = lyap_vec(&c, lam, &noise)?.p11;
        let psd = psd_variance(&c, lam, &noise, n_omega)?;
        let plateau = stationary_plateau(&c, lam, &noise.clone().with_seed(rng::derive_seed(cfg.seed, i as u64)), steps)?;
        worst_closed = worst_closed.max((closed - lyap).abs());
        worst_psd = worst_psd.max((psd - lyap).abs() / lyap);
        out.rows.push(vec![
            lam.into(),
            1.0.into(),
            closed.into(),
            lyap.into(),
            psd.into(),
            (plateau.mean / (0.5 * lam)).into(),
            (plateau.std_error / (0.5 * lam)).into(),
        ]);
    }
    let floor = noise_floor(&c, &nu, &noise)?;
    let bound = floor_upper_bound(&c, &nu, &noise)?;
    let mc = empirical_floor(&c, &nu, &noise, steps)?;
    let gap = (mc.mean - floor).abs() / floor;
    out.derive("floor", floor);
    out.derive("upper_bound", bound);
    out.derive("mc_plateau", mc.mean);
    out.derive("mc_plateau_se", mc.std_error);
    out.derive("relative_gap", gap);
    out.checks.push(Check::at_most("closed_vs_lyapunov", worst_closed, 1e-10));
    out.checks.push(Check::at_most("psd_vs_lyapunov_rel", worst_psd, 1e-6));
    out.checks.push(Check::at_most("mc_plateau_rel_gap", gap, 0.10));
    out.checks.push(Check::new("upper_bound_at_least_floor", bound >= floor, bound - floor, 0.0, "bound − floor ≥ 0"));
    Ok(out)
}

fn ellipsoid_run(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let n = cfg.int("n")?;
    let (big_r, r_in) = (cfg.num("R")?, cfg.num("r")?);
    let faces = match cfg.int("faces")? {
        0 => 3 * n,
        f => f,
    };
    let max_iter = cfg.int("max_iter")?;
    if n < 2 || !(big_r > r_in && r_in > 0.0) {
        return Err(invalid("need n ≥ 2 and R > r > 0"));
    }
    let mut r = rng::rng(cfg.seed);
    let center = rng::unit_vector(&mut r, n) * rng::uniform(&mut r, 0.5 * (big_r - r_in), big_r - r_in);
    let poly = Polytope::random_around(&mut r, &center, r_in, faces);
    let run = run_feasibility(&|x: &Vector| poly.oracle(x), &Vector::zeros(n), big_r, r_in, max_iter)?;
    let bound = iteration_bound(n, big_r, r_in, 0.0)?;
    let shrink = bulk_shrink(n)?;
    let mut out = ExperimentOutput::default();
    let mut logdet = 2.0 * n as f64 * big_r.ln();
    let mut worst: f64 = 0.0;
    for e in &run.ledger.entries {
        logdet += 2.0 * e.delta_log_tau_bulk;
        worst = worst.max((2.0 * e.delta_log_tau_bulk - logdet_step(n)).abs());
        out.rows.push(vec![
            e.k.into(),
            logdet.into(),
            e.delta_log_tau_bulk.into(),
            e.switched.into(),
            e.switch_jump.unwrap_or(f64::NAN).into(),
        ]);
    }
    out.derive("found", run.found);
    out.derive("iterations", run.state.k);
    out.derive("iteration_bound", bound);
    out.derive("bulk_shrink", shrink);
    out.derive("switches", run.ledger.switches());
    out.derive("switch_total", run.ledger.switch_total());
    out.checks.push(Check::at_most("det_identity", worst, 1e-10));
    out.checks.push(Check::new("found_within_bound", run.found && run.state.k <= bound, run.state.k as f64, bound as f64, "found and k ≤ bound"));
    out.checks.push(Check::new("center_in_polytope", poly.contains(&run.state.x), 0.0, 0.0, "returned center satisfies all faces"));
    Ok(out)
}

fn logdet_bench(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let dim = cfg.int("dim")?;
    let n_probes = cfg.int("n_probes")?;
    let m = match cfg.int("lanczos_steps")? {
        0 => dim,
        m => m,
    };
    let kind = match cfg.text("probe_kind")?.as_str() {
        "rademacher" => ProbeKind::Rademacher,
        "gaussian" => ProbeKind::Gaussian,
        other => return Err(invalid(format!("probe_kind must be rademacher or gaussian, got '{other}'"))),
    };
    let (lo, hi, eta) = (cfg.num("lambda_min")?, cfg.num("lambda_max")?, cfg.num("eta")?);
    if dim < 2 || !(lo > 0.0 && lo < hi) {
        return Err(invalid("need dim ≥ 2 and 0 < lambda_min < lambda_max"));
    }
    let mut r = rng::rng(cfg.seed);
    let a = rng::spd_with_spectrum(&mut r, &logspace(lo, hi, dim));
    let exact = logdet_chol(&a)?;
    let mut out = ExperimentOutput::default();
    out.rows.push(vec!["cholesky".into(), 0usize.into(), exact.into(), 0.0.into(), exact.into(), 0.0.into()]);
    let mut steps: Vec<usize> = [4, 8, 12].into_iter().filter(|&s| s < m).collect();
    steps.push(m);
    let mut rel_at_m = f64::NAN;
    for &s in &steps {
        let e = slq_logdet(&a, &ProbeConfig::new(n_probes, kind, cfg.seed, s)?)?;
        let rel = ((e.estimate - exact) / exact).abs();
        if s == m {
            rel_at_m = rel;
        }
        out.rows.push(vec!["slq".into(), s.into(), e.estimate.into(), e.stderr.into(), exact.into(), rel.into()]);
    }
    let tr = a.trace();
    let hutch = hutchinson_trace(&|z: &Vector| &a * z, dim, &ProbeConfig::new(n_probes, kind, cfg.seed, 2)?);
    out.rows.push(vec![
        "hutchinson_trace".into(),
        0usize.into(),
        hutch.estimate.into(),
        hutch.stderr.into(),
        tr.into(),
        ((hutch.estimate - tr) / tr).abs().into(),
    ]);
    let mut ctx = MaContext::new(2.0, 0.5, 1.0, a.clone() / hi)?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let before = residual_printed(&ctx)?;
        ctx.h = trust_region_update(&ctx, eta)?;
        let after = residual_printed(&ctx)?;
        worst = worst.max((after - (1.0 - dim as f64 * eta) * before).abs() / before.abs().max(1.0));
    }
    out.derive("exact_logdet", exact);
    out.derive("slq_rel_error_full_steps", rel_at_m);
    out.derive("trust_region_recursion_error", worst);
    out.checks.push(Check::at_most("slq_rel_error_full_steps", rel_at_m, 1e-6));
    out.checks.push(Check::at_most("hutchinson_stderr_units", (hutch.estimate - tr).abs() / hutch.stderr.max(1e-300), 4.0));
    out.checks.push(Check::at_most("trust_region_recursion", worst, 1e-12));
    Ok(out)
}

fn hodge_demo(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let (n_t, n_s, d) = (cfg.int("n_t")?, cfg.int("n_s")?, cfg.int("d")?);
    let boundary = if cfg.int("periodic")? != 0 { Boundary::Periodic } else { Boundary::Free };
    let (h, tol, max_iter) = (cfg.num("h")?, cfg.num("tol")?, cfg.int("max_iter")?);
    if d < 1 {
        return Err(invalid("need d ≥ 1"));
    }
    let k = Complex2D::new(n_t, n_s, boundary)?;
    let mut r = rng::rng(cfg.seed);
    let pairs = (0..k.n_faces())
        .map(|_| random_normalized_pair(&mut r, d.max(2)))
        .collect::<crate::Result<Vec<_>>>()?;
    let pairs: Vec<OperatorPair> = if d >= 2 {
        pairs
    } else {
        return Err(invalid("curvature cochains need d ≥ 2"));
    };
    let c = curvature_cochain(&k, &pairs, h)?;
    let red = gauge_reduce(&k, &c, tol, max_iter)?;
    let mut out = ExperimentOutput::default();
    for j in 0..n_s {
        for i in 0..n_t {
            let f = k.face(i, j);
            out.rows.push(vec![f.into(), i.into(), j.into(), c.values[f].norm_squared().into(), red.harmonic.values[f].norm_squared().into()]);
        }
    }
    let xi = Cochain::new(1, (0..k.n_edges()).map(|_| rng::normal_matrix(&mut r, d, d)).collect())?;
    let exact = coboundary(&k, &xi)?;
    let exact_red = gauge_reduce(&k, &exact, tol, max_iter)?;
    let exact_ratio = exact_red.energy / exact.norm_squared();
    let c2 = c.norm_squared();
    let exact_part = coboundary(&k, &red.xi_star)?.norm_squared();
    let split = (c2 - exact_part - red.energy).abs() / c2;
    out.derive("c_norm2", c2);
    out.derive("energy", red.energy);
    out.derive("iterations", red.iterations);
    out.derive("adjoint_norm", red.adjoint_norm);
    out.derive("exact_cocycle_energy_ratio", exact_ratio);
    out.checks.push(Check::at_most("exact_cocycle_energy_ratio", exact_ratio, 1e-16));
    out.checks.push(Check::at_most("orthogonal_split", split, 1e-8));
    out.checks.push(Check::at_most("adjoint_of_harmonic", red.adjoint_norm / c2.sqrt(), 1e-8));
    if k.n_edges() <= 1000 {
        let (_, harm) = dense_reduce(&k, &c)?;
        let gap = harm
            .values
            .iter()
            .zip(&red.harmonic.values)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
            / c2.sqrt();
        out.derive("dense_gap", gap);
        out.checks.push(Check::at_most("cg_vs_dense", gap, 1e-8));
    }
    Ok(out)
}

fn chebyshev_compare(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let (mu, l) = (cfg.num("mu")?, cfg.num("L")?);
    let grid = cfg.int("grid")?;
    let degrees = cfg.list("degrees")?;
    let kappa = l / mu;
    let target = (kappa.sqrt() - 1.0) / (kappa.sqrt() + 1.0);
    let gd = (kappa - 1.0) / (kappa + 1.0);
    let mut out = ExperimentOutput::default();
    let (mut worst_dev, mut worst_rate_large): (f64, f64) = (0.0, 0.0);
    let mut beats_gd = true;
    for &nf in &degrees {
        if nf < 1.0 || nf.fract() != 0.0 {
            return Err(invalid("degrees must be positive integers"));
        }
        let n = nf as usize;
        let rep = chebyshev_filter(n, mu, l, 0.0, grid)?;
        let f = &rep.filter;
        let sup = f.sup_norm();
        let dev = f
            .extremal_points()
            .iter()
            .enumerate()
            .map(|(j, &lam)| {
                let want = if j % 2 == 0 { sup } else { -sup };
                (f.eval(lam) - want).abs() / sup
            })
            .fold(0.0, f64::max);
        let rate = f.nth_root_rate();
        worst_dev = worst_dev.max(dev);
        if n >= 200 {
            worst_rate_large = worst_rate_large.max((rate - target).abs());
        }
        beats_gd &= rate < gd;
        out.rows.push(vec![n.into(), rep.sup_grid.into(), sup.into(), rate.into(), target.into(), gd.into(), dev.into()]);
    }
    out.derive("target_rate", target);
    out.derive("gd_rate", gd);
    out.checks.push(Check::at_most("equioscillation", worst_dev, 1e-8));
    out.checks.push(Check::at_most("nth_root_rate_gap_n_ge_200", worst_rate_large, 1e-3));
    out.checks.push(Check::new("beats_gradient_descent", beats_gd, 0.0, 0.0, "rate < (κ−1)/(κ+1) for every degree"));
    Ok(out)
}

fn adaptive_precond(cfg: &ExperimentConfig) -> HResult<ExperimentOutput> {
    let dim = cfg.int("dim")?;
    let (eta, zeta) = (cfg.num("eta")?, cfg.num("zeta")?);
    let iters = cfg.int("iters")?;
    if dim < 2 {
        return Err(invalid("need dim ≥ 2"));
    }
    let mut r = rng::rng(cfg.seed);
    let spd = |r: &mut rng::FlatRng| {
        let eigs: Vec<f64> = (0..dim).map(|_| rng::uniform(r, 0.5, 3.0)).collect();
        rng::spd_with_spectrum(r, &eigs)
    };
    let (mut h, mut e) = (spd(&mut r), spd(&mut r));
    let q = rng::orthogonal_matrix(&mut r, dim);
    let diag = |r: &mut rng::FlatRng| {
        &q * Matrix::from_diagonal(&Vector::from_fn(dim, |_, _| rng::uniform(r, 0.5, 3.0))) * q.transpose()
    };
    let (ht, et) = (diag(&mut r), diag(&mut r));
    let mut out = ExperimentOutput::default();
    let comm0 = commutator(&e, &h).norm();
    out.rows.push(vec![0usize.into(), comm0.into(), f64::NAN.into(), f64::NAN.into(), ((&h - &ht).norm() + (&e - &et).norm()).into()]);
    let mut worst_gap: f64 = 0.0;
    let mut printed_gap: f64 = 0.0;
    for k in 1..=iters {
        let up = adaptive_update(&h, &e, &ht, &et, eta, zeta)?;
        h = up.h;
        e = up.e;
        worst_gap = worst_gap.max(up.inverse_form_gap / spectral_norm(&up.g).max(1e-300).recip());
        printed_gap = printed_gap.max(up.printed_form_gap);
        out.rows.push(vec![
            k.into(),
            commutator(&e, &h).norm().into(),
            up.inverse_form_gap.into(),
            up.printed_form_gap.into(),
            ((&h - &ht).norm() + (&e - &et).norm()).into(),
        ]);
    }
    let comm_final = commutator(&e, &h).norm();
    out.derive("commutator_initial", comm0);
    out.derive("commutator_final", comm_final);
    out.derive("max_printed_form_gap", printed_gap);
    out.checks.push(Check::at_most("inverse_form_gap", worst_gap, 1e-10));
    out.checks.push(Check::new("commutator_decreases", comm_final < comm0, comm_final, comm0, "final < initial"));
    Ok(out)
}
