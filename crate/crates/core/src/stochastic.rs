//! Noise analysis of m-step methods under white gradient noise.
//!
//! On a curvature mode `λ` the noisy recursion is the ARMA model
//! `y_{k+1} = Σ_j α_j(λ) y_{k−j} − ζ_k`, `ζ_k = Σ_j η_j ξ_{k−j}`. For `m = 1`
//! this reads `y_{k+1} = a y_k + b y_{k−1} − η₀ξ_k − η₁ξ_{k−1}` with
//! `b = −(γ₁ − η₁λ)`. Note the sign: [`crate::multistep`] uses the opposite
//! convention `b = γ₁ − η₁λ` for the product of the multipliers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, spectral_radius, symmetrize, unvec, vec_of, Matrix};
use crate::multistep::{bulk_exponent, companion, modal_multipliers_m1, roots, MethodCoefficients, SpectralMeasure};
use crate::rng;
use crate::stats;

/// How the MA taps see the noise sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseCoupling {
    /// Each tap `η_j ξ` draws a fresh independent sample, so the innovation is
    /// white with variance `σ² Σ η_j²`. This is the model under which the
    /// Lyapunov forcing `Q = σ² Σ η_j² e₁e₁ᵀ` is exact.
    #[default]
    Independent,
    /// The taps reuse the same noisy gradient: `ζ_k = Σ η_j ξ_{k−j}`.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-atom variances `(λ, σ²(λ))`; atoms not listed use `default_sigma2`.
    pub sigma2: Vec<(f64, f64)>,
    pub default_sigma2: f64,
    pub seed: u64,
    pub coupling: NoiseCoupling,
}

impl NoiseModel {
    pub fn uniform(sigma2: f64, seed: u64) -> Result<Self> {
        Self::new(Vec::new(), sigma2, seed, NoiseCoupling::Independent)
    }

    pub fn new(sigma2: Vec<(f64, f64)>, default_sigma2: f64, seed: u64, coupling: NoiseCoupling) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(default_sigma2) || sigma2.iter().any(|&(l, s)| !ok(s) || !l.is_finite()) {
            return Err(Error::InvalidInput("noise variances must be finite and nonnegative".into()));
        }
        Ok(Self {
            sigma2,
            default_sigma2,
            seed,
            coupling,
        })
    }

    pub fn with_coupling(mut self, coupling: NoiseCoupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sigma2_at(&self, lambda: f64) -> f64 {
        self.sigma2
            .iter()
            .find(|(l, _)| (l - lambda).abs() <= 1e-12 * lambda.abs().max(1.0))
            .map(|p| p.1)
            .unwrap_or(self.default_sigma2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryCovariance {
    pub lambda: f64,
    /// Covariance of `[y_k, …, y_{k−m}]`.
    pub p: Matrix,
    pub p11: f64,
    /// `‖P − APAᵀ − Q‖_F` of the solved system.
    pub residual: f64,
}

fn eta_sq(coeffs: &MethodCoefficients) -> f64 {
    coeffs.eta().iter().map(|e| e * e).sum()
}

/// ARMA trajectory `y_1, …, y_k` from `y_init = [y_0, y_{−1}, …, y_{−m}]`,
/// driven by standard normals scaled by `σ(λ)` drawn from `noise.seed`.
pub fn simulate_modal(
    coeffs: &MethodCoefficients,
    lambda: f64,
    noise: &NoiseModel,
    y_init: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    let alpha = coeffs.recurrence(lambda);
    if y_init.len() != alpha.len() {
        return Err(Error::InvalidInput(format!("y_init must have length {}", alpha.len())));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let sigma = noise.sigma2_at(lambda).sqrt();
    let eta = coeffs.eta();
    let mut r = rng::rng(noise.seed);
    let mut state = y_init.to_vec();
    // ξ_{k}, ξ_{k−1}, …, ξ_{k−m} for the shared coupling.
    let mut xi = vec![0.0; eta.len()];
    let indep_scale = sigma * eta_sq(coeffs).sqrt();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let zeta = match noise.coupling {
            NoiseCoupling::Independent => indep_scale * rng::normal(&mut r),
            NoiseCoupling::Shared => {
                xi.rotate_right(1);
                xi[0] = sigma * rng::normal(&mut r);
                eta.iter().zip(&xi).map(|(e, x)| e * x).sum()
            }
        };
        let next: f64 = alpha.iter().zip(&state).map(|(a, y)| a * y).sum::<f64>() - zeta;
        state.rotate_right(1);
        state[0] = next;
        out.push(next);
    }
    Ok(out)
}

/// Closed-form `p11 = σ²(η₀² + η₁²) / D`, `D = 1 − a² − b² − 2a²b/(1 − b)`.
pub fn p11_closed_m1(coeffs: &MethodCoefficients, lambda: f64, sigma2: f64) -> Result<f64> {
    if coeffs.m() != 1 {
        return Err(Error::Unsupported("closed-form p11 needs m = 1".into()));
    }
    let alpha = coeffs.recurrence(lambda);
    let (a, b) = (alpha[0], alpha[1]);
    if spectral_radius(&companion(coeffs, lambda)) >= 1.0 {
        return Err(Error::OutOfDomain(format!("not Schur stable at λ = {lambda}")));
    }
    if b == 1.0 {
        return Err(Error::OutOfDomain("b = 1".into()));
    }
    let d = 1.0 - a * a - b * b - 2.0 * a * a * b / (1.0 - b);
    Ok(sigma2 * eta_sq(coeffs) / d)
}

/// Solves `P = A P Aᵀ + Q` by `vec P = (I − A⊗A)⁻¹ vec Q`.
fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<(Matrix, f64)> {
    let n = a.nrows();
    let lhs = Matrix::identity(n * n, n * n) - kron(a, a);
    let v = lhs
        .lu()
        .solve(&vec_of(q))
        .ok_or_else(|| Error::NumericalError("I − A⊗A is singular".into()))?;
    let p = symmetrize(&unvec(&v, n, n));
    let residual = (&p - a * &p * a.transpose() - q).norm();
    Ok((p, residual))
}

/// Stationary covariance of the modal state. Under
/// [`NoiseCoupling::Independent`] the forcing is `Q = σ² Σ η_j² e₁e₁ᵀ`; under
/// [`NoiseCoupling::Shared`] the state is augmented with the last `m` noise
/// samples and the result is the `y`-block of the augmented solution.
pub fn lyap_vec(coeffs: &MethodCoefficients, lambda: f64, noise: &NoiseModel) -> Result<StationaryCovariance> {
    let a = companion(coeffs, lambda);
    let rho = spectral_radius(&a);
    if rho >= 1.0 {
        return Err(Error::Unstable(format!("ρ(A) = {rho} at λ = {lambda}")));
    }
    let sigma2 = noise.sigma2_at(lambda);
    let n = a.nrows();
    let (p, residual) = match noise.coupling {
        NoiseCoupling::Independent => {
            let mut q = Matrix::zeros(n, n);
            q[(0, 0)] = sigma2 * eta_sq(coeffs);
            solve_lyapunov(&a, &q)?
        }
        NoiseCoupling::Shared => {
            let m = coeffs.m();
            let eta = coeffs.eta();
            // s_k = [y_k … y_{k−m}, ξ_{k−1} … ξ_{k−m}]
            let dim = n + m;
            let mut f = Matrix::zeros(dim, dim);
            f.view_mut((0, 0), (n, n)).copy_from(&a);
            for j in 1..=m {
                f[(0, n + j - 1)] = -eta[j];
            }
            for j in 1..m {
                f[(n + j, n + j - 1)] = 1.0;
            }
            let mut g = crate::linalg::Vector::zeros(dim);
            g[0] = -eta[0];
            g[n] = 1.0;
            let q = &g * g.transpose() * sigma2;
            let (p_aug, res) = solve_lyapunov(&f, &q)?;
            (p_aug.view((0, 0), (n, n)).into_owned(), res)
        }
    };
    Ok(StationaryCovariance {
        lambda,
        p11: p[(0, 0)],
        p,
        residual,
    })
}

/// Stationary floor `½ Σ_atoms w λ p11(λ)`.
pub fn noise_floor(coeffs: &MethodCoefficients, nu: &SpectralMeasure, noise: &NoiseModel) -> Result<f64> {
    nu.atoms()
        .iter()
        .map(|&(lam, w)| lyap_vec(coeffs, lam, noise).map(|c| 0.5 * w * lam * c.p11))
        .sum()
}

/// `½ Σ_atoms w λ σ² Σ η_j² / (1 − ρ(A)²)`. This bounds the floor when `A(λ)`
/// is close to normal but not in general: near a double multiplier the
/// companion's transient growth makes `p11` exceed it.
pub fn floor_upper_bound(coeffs: &MethodCoefficients, nu: &SpectralMeasure, noise: &NoiseModel) -> Result<f64> {
    let mut total = 0.0;
    for &(lam, w) in nu.atoms() {
        let rho = spectral_radius(&companion(coeffs, lam));
        if rho >= 1.0 {
            return Err(Error::Unstable(format!("ρ(A) = {rho} at λ = {lam}")));
        }
        total += 0.5 * w * lam * noise.sigma2_at(lam) * eta_sq(coeffs) / (1.0 - rho * rho);
    }
    Ok(total)
}

/// `σ²|N(e^{iω})|² / |1 − Σ α_j e^{−i(j+1)ω}|²` on `ω_j = −π + 2πj/n`.
/// `|N|²` is `Σ η_j²` for independent taps and `|Σ η_j e^{−ijω}|²` for shared ones.
pub fn psd_curve(coeffs: &MethodCoefficients, lambda: f64, noise: &NoiseModel, n_omega: usize) -> Vec<(f64, f64)> {
    let alpha = coeffs.recurrence(lambda);
    let eta = coeffs.eta();
    let sigma2 = noise.sigma2_at(lambda);
    let e2 = eta_sq(coeffs);
    (0..n_omega)
        .map(|j| {
            let w = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / n_omega as f64;
            let z = |p: f64| num_complex::Complex64::from_polar(1.0, -p * w);
            let den = alpha
                .iter()
                .enumerate()
                .fold(num_complex::Complex64::new(1.0, 0.0), |acc, (j, a)| acc - z((j + 1) as f64) * *a);
            let num = match noise.coupling {
                NoiseCoupling::Independent => e2,
                NoiseCoupling::Shared => eta
                    .iter()
                    .enumerate()
                    .fold(num_complex::Complex64::new(0.0, 0.0), |acc, (j, e)| acc + z(j as f64) * *e)
                    .norm_sqr(),
            };
            (w, sigma2 * num / den.norm_sqr())
        })
        .collect()
}

/// `(1/2π) ∫ S(ω) dω` by the periodic trapezoid rule.
pub fn psd_variance(coeffs: &MethodCoefficients, lambda: f64, noise: &NoiseModel, n_omega: usize) -> Result<f64> {
    if n_omega < 256 {
        return Err(Error::InvalidInput(format!("n_omega must be at least 256, got {n_omega}")));
    }
    let rho = spectral_radius(&companion(coeffs, lambda));
    if rho >= 1.0 {
        return Err(Error::Unstable(format!("ρ(A) = {rho} at λ = {lambda}")));
    }
    let curve = psd_curve(coeffs, lambda, noise, n_omega);
    Ok(curve.iter().map(|p| p.1).sum::<f64>() / n_omega as f64)
}

/// Frequency in `[0, π]` at which the PSD peaks, and the grid spacing.
pub fn psd_peak(coeffs: &MethodCoefficients, lambda: f64, noise: &NoiseModel, n_omega: usize) -> (f64, f64) {
    let curve = psd_curve(coeffs, lambda, noise, n_omega);
    let peak = curve
        .iter()
        .filter(|p| p.0 >= 0.0)
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|p| p.0)
        .unwrap_or(0.0);
    (peak, 2.0 * std::f64::consts::PI / n_omega as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationBound {
    /// `(exp ∫ Σ_i log|r_i|² dν)^k C_det`, zero multipliers skipped.
    pub determinantal: f64,
    pub floor: f64,
    /// `Σ w λ/(1 − ρ(A)²) · σ²/(1 − b) · |Σ η_j r₊^j|²`.
    pub tail: f64,
    /// True when `m ≥ 2` and `r₊` is taken as the max-modulus multiplier.
    pub heuristic_tail: bool,
    pub total: f64,
}

/// Three-term expectation bound: determinantal exponential, exact floor and
/// oscillatory tail, evaluated as written. `b` is the last recurrence
/// coefficient (`−(γ₁ − η₁λ)` for `m = 1`).
pub fn expectation_bound(
    coeffs: &MethodCoefficients,
    nu: &SpectralMeasure,
    noise: &NoiseModel,
    c_det: f64,
    k: u32,
) -> Result<ExpectationBound> {
    let a_bulk = bulk_exponent(coeffs, nu)?;
    let determinantal = (-2.0 * k as f64 * a_bulk).exp() * c_det;
    let floor = noise_floor(coeffs, nu, noise)?;
    let heuristic_tail = coeffs.m() != 1;
    let eta = coeffs.eta();
    let mut tail = 0.0;
    for &(lam, w) in nu.atoms() {
        let rho = spectral_radius(&companion(coeffs, lam));
        let r_plus = if heuristic_tail {
            roots(coeffs, lam)
                .into_iter()
                .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap())
                .unwrap()
        } else {
            modal_multipliers_m1(coeffs, lam)?.roots[0]
        };
        let b = *coeffs.recurrence(lam).last().unwrap();
        let ma = eta
            .iter()
            .enumerate()
            .fold(num_complex::Complex64::new(0.0, 0.0), |acc, (j, e)| acc + r_plus.powi(j as i32) * *e);
        tail += w * lam / (1.0 - rho * rho) * noise.sigma2_at(lam) / (1.0 - b) * ma.norm_sqr();
    }
    Ok(ExpectationBound {
        determinantal,
        floor,
        tail,
        heuristic_tail,
        total: determinantal + floor + tail,
    })
}

/// Exact `E[y_k²]`, `k = 0..=k_max`, from the covariance recursion
/// `P_{k+1} = A P_k Aᵀ + Q` (independent taps) started at `y_init y_initᵀ`.
pub fn second_moment_path(
    coeffs: &MethodCoefficients,
    lambda: f64,
    sigma2: f64,
    y_init: &[f64],
    k_max: usize,
) -> Result<Vec<f64>> {
    let a = companion(coeffs, lambda);
    let n = a.nrows();
    if y_init.len() != n {
        return Err(Error::InvalidInput(format!("y_init must have length {n}")));
    }
    let y = crate::linalg::Vector::from_column_slice(y_init);
    let mut p = &y * y.transpose();
    let mut q = Matrix::zeros(n, n);
    q[(0, 0)] = sigma2 * eta_sq(coeffs);
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(p[(0, 0)]);
    for _ in 0..k_max {
        p = &a * &p * a.transpose() + &q;
        out.push(p[(0, 0)]);
    }
    Ok(out)
}

/// Burn-in length `⌈10/(1 − ρ_max)⌉`.
pub fn burn_in(rho_max: f64) -> usize {
    (10.0 / (1.0 - rho_max)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// Time average of `½ λ y_k²` after burn-in.
    pub mean: f64,
    /// Batch-means standard error.
    pub std_error: f64,
    pub burn_in: usize,
}

/// Long-run average of `½ λ y²` along one trajectory of `steps` measured steps.
pub fn stationary_plateau(
    coeffs: &MethodCoefficients,
    lambda: f64,
    noise: &NoiseModel,
    steps: usize,
) -> Result<Plateau> {
    let rho = spectral_radius(&companion(coeffs, lambda));
    if rho >= 1.0 {
        return Err(Error::Unstable(format!("ρ(A) = {rho} at λ = {lambda}")));
    }
    let burn = burn_in(rho);
    let init = vec![0.0; coeffs.m() + 1];
    let traj = simulate_modal(coeffs, lambda, noise, &init, burn + steps)?;
    let f: Vec<f64> = traj[burn..].iter().map(|y| 0.5 * lambda * y * y).collect();
    let batches = stats::batch_means(&f, 50);
    Ok(Plateau {
        mean: stats::mean(&f),
        std_error: stats::std_error(&batches),
        burn_in: burn,
    })
}

/// Plateau of `E[f − f*] = Σ w · ½λ y²` over the atoms, one seeded
/// trajectory per atom (atoms run in parallel).
pub fn empirical_floor(
    coeffs: &MethodCoefficients,
    nu: &SpectralMeasure,
    noise: &NoiseModel,
    steps: usize,
) -> Result<Plateau> {
    let parts: Vec<Result<(f64, Plateau)>> = nu
        .atoms()
        .par_iter()
        .enumerate()
        .map(|(i, &(lam, w))| {
            let nm = noise.clone().with_seed(rng::derive_seed(noise.seed, i as u64));
            stationary_plateau(coeffs, lam, &nm, steps).map(|p| (w, p))
        })
        .collect();
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut burn = 0;
    for part in parts {
        let (w, p) = part?;
        mean += w * p.mean;
        var += (w * p.std_error).powi(2);
        burn = burn.max(p.burn_in);
    }
    Ok(Plateau {
        mean,
        std_error: var.sqrt(),
        burn_in: burn,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMoment {
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Ensemble estimate of `E[f(x_k) − f*] = Σ w · ½λ E[y_k²]` over `replicas`
/// independent runs from the deterministic state `y_init` (same for every atom).
pub fn ensemble_objective(
    coeffs: &MethodCoefficients,
    nu: &SpectralMeasure,
    noise: &NoiseModel,
    y_init: &[f64],
    ks: &[usize],
    replicas: usize,
) -> Result<Vec<EnsembleMoment>> {
    let k_max = *ks.iter().max().ok_or_else(|| Error::InvalidInput("no k requested".into()))?;
    if k_max == 0 || replicas < 2 {
        return Err(Error::InvalidInput("need k ≥ 1 and at least 2 replicas".into()));
    }
    let samples: Vec<Result<Vec<f64>>> = (0..replicas)
        .into_par_iter()
        .map(|rep| {
            let mut vals = vec![0.0; ks.len()];
            for (i, &(lam, w)) in nu.atoms().iter().enumerate() {
                let seed = rng::derive_seed(rng::derive_seed(noise.seed, rep as u64), i as u64);
                let traj = simulate_modal(coeffs, lam, &noise.clone().with_seed(seed), y_init, k_max)?;
                for (v, &k) in vals.iter_mut().zip(ks) {
                    let y = if k == 0 { y_init[0] } else { traj[k - 1] };
                    *v += w * 0.5 * lam * y * y;
                }
            }
            Ok(vals)
        })
        .collect();
    let samples: Vec<Vec<f64>> = samples.into_iter().collect::<Result<_>>()?;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            EnsembleMoment {
                k,
                mean: stats::mean(&col),
                std_error: stats::std_error(&col),
            }
        })
        .collect())
}
