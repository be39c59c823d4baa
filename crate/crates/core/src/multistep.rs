//! Spectral analysis of general linear m-step methods
//! `x_{k+1} = x_k − Σ η_j ∇f(x_{k−j}) + Σ γ_j (x_{k+1−j} − x_{k−j})`.
//!
//! On a curvature mode `λ` the iteration reduces to the scalar recurrence
//! `y_{k+1} = a y_k + Σ_{j=1}^{m−1} (γ_{j+1} − η_j λ) y_{k−j} − (γ_m − η_m λ) y_{k−m}`
//! with `a = 1 − η₀λ + γ₁`. Its characteristic polynomial is
//! `χ(r) = r^{m+1} − a r^m − Σ (γ_{j+1} − η_j λ) r^{m−j} + (γ_m − η_m λ)`,
//! so for `m = 1` the multipliers satisfy `r₊r₋ = γ₁ − η₁λ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, linspace, Matrix};

const ZERO_ROOT: f64 = 1e-300;
const OSC_IMAG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoefficients {
    eta: Vec<f64>,
    gamma: Vec<f64>,
}

impl MethodCoefficients {
    /// `eta = (η₀, …, η_m)`, `gamma = (γ₁, …, γ_m)`.
    pub fn new(eta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() || eta.len() != gamma.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "need m ≥ 1 with m+1 etas and m gammas, got {} and {}",
                eta.len(),
                gamma.len()
            )));
        }
        if eta.iter().chain(&gamma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(Self { eta, gamma })
    }

    /// `m = 1` method with parameters `(η₀, η₁, γ₁)`.
    pub fn m1(eta0: f64, eta1: f64, gamma1: f64) -> Result<Self> {
        Self::new(vec![eta0, eta1], vec![gamma1])
    }

    /// Heavy ball `x_{k+1} = x_k − α∇f(x_k) + β(x_k − x_{k−1})`.
    pub fn heavy_ball(alpha: f64, beta: f64) -> Result<Self> {
        Self::m1(alpha, 0.0, beta)
    }

    /// Gradient descent as the degenerate `m = 1` method.
    pub fn gradient_descent(step: f64) -> Result<Self> {
        Self::m1(step, 0.0, 0.0)
    }

    pub fn m(&self) -> usize {
        self.gamma.len()
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    fn require_m1(&self) -> Result<(f64, f64, f64)> {
        if self.m() != 1 {
            return Err(Error::Unsupported(format!("closed form needs m = 1, got m = {}", self.m())));
        }
        Ok((self.eta[0], self.eta[1], self.gamma[0]))
    }

    /// `a(λ) = 1 − η₀λ + γ₁`.
    pub fn a(&self, lambda: f64) -> f64 {
        1.0 - self.eta[0] * lambda + self.gamma[0]
    }

    /// Recurrence weights `α_j(λ)`: `y_{k+1} = Σ_{j=0}^{m} α_j y_{k−j}`.
    pub fn recurrence(&self, lambda: f64) -> Vec<f64> {
        let m = self.m();
        let mut alpha = Vec::with_capacity(m + 1);
        alpha.push(self.a(lambda));
        for j in 1..m {
            alpha.push(self.gamma[j] - self.eta[j] * lambda);
        }
        alpha.push(-(self.gamma[m - 1] - self.eta[m] * lambda));
        alpha
    }
}

/// Finite positive measure `Σ w_i δ(λ − λ_i)` supported in `[μ, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    mu: f64,
    l: f64,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, mu: f64, l: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= l && l.is_finite()) {
            return Err(Error::InvalidInput(format!("need 0 < μ ≤ L, got μ = {mu}, L = {l}")));
        }
        for &(lam, w) in &atoms {
            if !(w > 0.0 && w.is_finite()) || !(lam >= mu && lam <= l) {
                return Err(Error::InvalidInput(format!(
                    "atom ({lam}, {w}) must have positive weight and lie in [{mu}, {l}]"
                )));
            }
        }
        Ok(Self { atoms, mu, l })
    }

    /// Unit-weight atoms at the given eigenvalues, band = their hull.
    pub fn from_eigenvalues(eigs: &[f64]) -> Result<Self> {
        let mu = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let l = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self::new(eigs.iter().map(|&e| (e, 1.0)).collect(), mu, l)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

/// Monic coefficients of `χ_λ`, highest power first (length `m + 2`).
pub fn char_poly(coeffs: &MethodCoefficients, lambda: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    out.extend(coeffs.recurrence(lambda).into_iter().map(|a| -a));
    out
}

/// Companion matrix with first row `α(λ)` and unit subdiagonal; this is also
/// the state-transition matrix of `[y_k, …, y_{k−m}]`.
pub fn companion(coeffs: &MethodCoefficients, lambda: f64) -> Matrix {
    let alpha = coeffs.recurrence(lambda);
    let n = alpha.len();
    let mut c = Matrix::zeros(n, n);
    for (j, a) in alpha.iter().enumerate() {
        c[(0, j)] = *a;
    }
    for i in 1..n {
        c[(i, i - 1)] = 1.0;
    }
    c
}

/// Roots of `χ_λ` (companion eigenvalues), any `m`.
pub fn roots(coeffs: &MethodCoefficients, lambda: f64) -> Vec<Complex64> {
    eigenvalues(&companion(coeffs, lambda))
}

pub fn max_root_modulus(coeffs: &MethodCoefficients, lambda: f64) -> f64 {
    roots(coeffs, lambda).iter().map(|r| r.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalMultipliers {
    pub lambda: f64,
    pub roots: Vec<Complex64>,
    pub rho_max: f64,
    pub oscillatory: bool,
    /// `ρ = √(γ₁ − η₁λ)` on the oscillatory set.
    pub rho: Option<f64>,
    /// `cos ϑ = a / (2ρ)` on the oscillatory set.
    pub cos_theta: Option<f64>,
}

impl ModalMultipliers {
    /// Oscillation angle `ϑ ∈ (0, π)` on the oscillatory set.
    pub fn theta(&self) -> Option<f64> {
        self.cos_theta.map(|c| c.clamp(-1.0, 1.0).acos())
    }
}

/// Discriminant `Δ(λ) = a² − 4(γ₁ − η₁λ)`; negative on the oscillatory set.
pub fn discriminant_m1(coeffs: &MethodCoefficients, lambda: f64) -> Result<f64> {
    let (_, eta1, gamma1) = coeffs.require_m1()?;
    let a = coeffs.a(lambda);
    Ok(a * a - 4.0 * (gamma1 - eta1 * lambda))
}

/// Closed-form `r± = ½[a ± √(a² − 4(γ₁ − η₁λ))]`.
pub fn modal_multipliers_m1(coeffs: &MethodCoefficients, lambda: f64) -> Result<ModalMultipliers> {
    let (_, eta1, gamma1) = coeffs.require_m1()?;
    let a = coeffs.a(lambda);
    let b = gamma1 - eta1 * lambda;
    let disc = a * a - 4.0 * b;
    let (roots, rho, cos_theta) = if disc >= 0.0 {
        // Stable real roots: avoid cancellation through the product r₊r₋ = b.
        let s = disc.sqrt();
        let big = 0.5 * (a + s.copysign(if a == 0.0 { 1.0 } else { a }));
        let small = if big != 0.0 { b / big } else { 0.0 };
        let (rp, rm) = if a >= 0.0 { (big, small) } else { (small, big) };
        (vec![Complex64::new(rp, 0.0), Complex64::new(rm, 0.0)], None, None)
    } else {
        let im = 0.5 * (-disc).sqrt();
        let rho = b.sqrt();
        (
            vec![Complex64::new(0.5 * a, im), Complex64::new(0.5 * a, -im)],
            Some(rho),
            Some(a / (2.0 * rho)),
        )
    };
    let rho_max = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let oscillatory = roots.iter().any(|r| r.im.abs() > OSC_IMAG_TOL);
    Ok(ModalMultipliers {
        lambda,
        roots,
        rho_max,
        oscillatory,
        rho: if oscillatory { rho } else { None },
        cos_theta: if oscillatory { cos_theta } else { None },
    })
}

/// Jury test for `r² − a r + b`, `a = 1 − η₀λ + γ₁`, `b = γ₁ − η₁λ`:
/// `1 − b > 0`, `1 + a + b > 0`, `1 − a + b > 0`.
pub fn jury_stable_m1(coeffs: &MethodCoefficients, lambda: f64) -> Result<bool> {
    let (_, eta1, gamma1) = coeffs.require_m1()?;
    let a = coeffs.a(lambda);
    let b = gamma1 - eta1 * lambda;
    Ok(1.0 - b > 0.0 && 1.0 + a + b > 0.0 && 1.0 - a + b > 0.0)
}

/// Endpoint inequalities that certify Jury stability on all of `[μ, L]`
/// (each Jury quantity is affine in `λ`).
pub fn jury_endpoints_m1(coeffs: &MethodCoefficients, mu: f64, l: f64) -> Result<bool> {
    Ok(jury_stable_m1(coeffs, mu)? && jury_stable_m1(coeffs, l)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub schur_stable: bool,
    pub rho_bar: f64,
    pub violations: Vec<f64>,
}

/// Worst-case multiplier modulus over a uniform `λ` grid on `[μ, L]`.
pub fn stability_report(coeffs: &MethodCoefficients, mu: f64, l: f64, grid: usize) -> Result<StabilityReport> {
    if grid < 2 {
        return Err(Error::InvalidInput("grid must have at least 2 points".into()));
    }
    if !(mu > 0.0 && mu <= l) {
        return Err(Error::InvalidInput(format!("need 0 < μ ≤ L, got {mu}, {l}")));
    }
    let mut rho_bar: f64 = 0.0;
    let mut violations = Vec::new();
    for lam in linspace(mu, l, grid) {
        let r = max_root_modulus(coeffs, lam);
        rho_bar = rho_bar.max(r);
        if r >= 1.0 {
            violations.push(lam);
        }
    }
    Ok(StabilityReport {
        schur_stable: rho_bar < 1.0 - 1e-12,
        rho_bar,
        violations,
    })
}

/// `Σ_i log(1/|r_i(λ)|)` with roots of modulus ≤ 1e−300 skipped.
pub fn log_inverse_moduli(coeffs: &MethodCoefficients, lambda: f64) -> Result<f64> {
    let rs = roots(coeffs, lambda);
    if rs.iter().any(|r| r.norm() >= 1.0) {
        return Err(Error::Unstable(format!("multiplier with |r| ≥ 1 at λ = {lambda}")));
    }
    Ok(rs.iter().filter(|r| r.norm() > ZERO_ROOT).map(|r| -r.norm().ln()).sum())
}

/// Bulk decay exponent `A = Σ_atoms w · Σ_i log(1/ρ_i(λ))`.
pub fn bulk_exponent(coeffs: &MethodCoefficients, nu: &SpectralMeasure) -> Result<f64> {
    nu.atoms()
        .iter()
        .map(|&(lam, w)| log_inverse_moduli(coeffs, lam).map(|v| w * v))
        .sum()
}

fn xi_m1(coeffs: &MethodCoefficients, lambda: f64) -> Result<(f64, f64)> {
    let (_, eta1, gamma1) = coeffs.require_m1()?;
    let b = gamma1 - eta1 * lambda;
    let disc = discriminant_m1(coeffs, lambda)?;
    if !(disc < 0.0 && b > 0.0) {
        return Err(Error::OutOfDomain(format!("λ = {lambda} is outside the oscillatory set")));
    }
    Ok((coeffs.a(lambda) / (2.0 * b.sqrt()), b))
}

/// Oscillation angle `ϑ(λ) = arccos ξ(λ)`, `ξ = a / (2√(γ₁ − η₁λ))`.
pub fn theta_m1(coeffs: &MethodCoefficients, lambda: f64) -> Result<f64> {
    Ok(xi_m1(coeffs, lambda)?.0.clamp(-1.0, 1.0).acos())
}

/// `ϑ′(λ) = −ξ′/√(1 − ξ²)`,
/// `ξ′ = (−2η₀(γ₁ − η₁λ) + η₁ a) / (4(γ₁ − η₁λ)^{3/2})`.
pub fn theta_prime_m1(coeffs: &MethodCoefficients, lambda: f64) -> Result<f64> {
    let (xi, b) = xi_m1(coeffs, lambda)?;
    let (eta0, eta1, _) = coeffs.require_m1()?;
    let num = -2.0 * eta0 * b + eta1 * coeffs.a(lambda);
    let xi_prime = num / (4.0 * b.powf(1.5));
    Ok(-xi_prime / (1.0 - xi * xi).sqrt())
}

/// Closed interval of `λ` where `Δ(λ) < 0` (before intersecting with a band).
pub fn oscillatory_interval_m1(coeffs: &MethodCoefficients) -> Result<Option<(f64, f64)>> {
    let (eta0, eta1, gamma1) = coeffs.require_m1()?;
    // Δ(λ) = η₀²λ² + (4η₁ − 2η₀(1+γ₁))λ + (1−γ₁)²
    let qa = eta0 * eta0;
    let qb = 4.0 * eta1 - 2.0 * eta0 * (1.0 + gamma1);
    let qc = (1.0 - gamma1).powi(2);
    if qa == 0.0 {
        return Ok(if qb == 0.0 {
            None
        } else if qb > 0.0 {
            Some((f64::NEG_INFINITY, -qc / qb))
        } else {
            Some((-qc / qb, f64::INFINITY))
        });
    }
    let d = qb * qb - 4.0 * qa * qc;
    if d <= 0.0 {
        return Ok(None);
    }
    let s = d.sqrt();
    let q = -0.5 * (qb + s.copysign(qb));
    let (r1, r2) = (q / qa, qc / q);
    Ok(Some((r1.min(r2), r1.max(r2))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationaryKind {
    Interior,
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub lambda: f64,
    pub kind: StationaryKind,
}

/// Interior zero of `ϑ′`: `λ* = (2η₀γ₁ − η₁(1 + γ₁)) / (η₀η₁)`.
pub fn stationary_lambda_m1(coeffs: &MethodCoefficients) -> Result<Option<f64>> {
    let (eta0, eta1, gamma1) = coeffs.require_m1()?;
    if eta0 * eta1 == 0.0 {
        return Ok(None);
    }
    Ok(Some((2.0 * eta0 * gamma1 - eta1 * (1.0 + gamma1)) / (eta0 * eta1)))
}

/// Stationary-phase points on `E_osc ∩ [μ, L]`: the interior `λ*` when it lies
/// there, followed by the endpoints of the oscillatory component.
pub fn stationary_points_m1(coeffs: &MethodCoefficients, mu: f64, l: f64) -> Result<Vec<StationaryPoint>> {
    let mut out = Vec::new();
    let Some((lo, hi)) = oscillatory_interval_m1(coeffs)? else {
        return Ok(out);
    };
    let (lo, hi) = (lo.max(mu), hi.min(l));
    if lo >= hi {
        return Ok(out);
    }
    if let Some(star) = stationary_lambda_m1(coeffs)? {
        if star > lo && star < hi {
            out.push(StationaryPoint {
                lambda: star,
                kind: StationaryKind::Interior,
            });
        }
    }
    for e in [lo, hi] {
        out.push(StationaryPoint {
            lambda: e,
            kind: StationaryKind::Endpoint,
        });
    }
    Ok(out)
}

/// `ϑ″` by one Richardson step on central differences of `ϑ′` (base step 1e−5).
pub fn theta_second_m1(coeffs: &MethodCoefficients, lambda: f64) -> Result<f64> {
    let step = 1e-5;
    let d = |h: f64| -> Result<f64> {
        Ok((theta_prime_m1(coeffs, lambda + h)? - theta_prime_m1(coeffs, lambda - h)?) / (2.0 * h))
    };
    let (d1, d2) = (d(step)?, d(0.5 * step)?);
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Airy amplitude `c = π^{−1/2} (ρ/(1−ρ²))^{1/2} |ϑ″|^{−1/2}` and phase `π/4`.
pub fn airy_amplitude(coeffs: &MethodCoefficients, lambda_star: f64) -> Result<(f64, f64)> {
    let mm = modal_multipliers_m1(coeffs, lambda_star)?;
    let rho = mm
        .rho
        .ok_or_else(|| Error::OutOfDomain(format!("λ = {lambda_star} is outside the oscillatory set")))?;
    if rho >= 1.0 {
        return Err(Error::Unstable(format!("ρ(λ*) = {rho} ≥ 1")));
    }
    let t2 = theta_second_m1(coeffs, lambda_star)?;
    if t2.abs() < 1e-10 {
        return Err(Error::DegenerateStationaryPoint(t2.abs()));
    }
    let c = (rho / (1.0 - rho * rho)).sqrt() / (std::f64::consts::PI.sqrt() * t2.abs().sqrt());
    Ok((c, std::f64::consts::FRAC_PI_4))
}

/// Stokes jump at a wall point: with `q = ∂_λχ / ∂_rχ = (η₀r − η₁)/(2r − a)`,
/// returns `(arg q / 2π, arg q)`.
pub fn stokes_jump_m1(coeffs: &MethodCoefficients, lambda_wall: f64, r_wall: Complex64) -> Result<(f64, f64)> {
    let (eta0, eta1, gamma1) = coeffs.require_m1()?;
    let a = coeffs.a(lambda_wall);
    let b = gamma1 - eta1 * lambda_wall;
    let chi = r_wall * r_wall - r_wall * a + b;
    let scale = 1.0 + a.abs() + b.abs();
    if chi.norm() > 1e-8 * scale {
        return Err(Error::NotAWall(format!("r = {r_wall} is not a multiplier at λ = {lambda_wall}")));
    }
    let disc = a * a - 4.0 * b;
    let on_circle = (r_wall.norm() - 1.0).abs() <= 1e-8;
    if !on_circle && disc.abs() > 1e-8 * scale * scale {
        return Err(Error::NotAWall(format!(
            "(λ, r) = ({lambda_wall}, {r_wall}) has |r| ≠ 1 and nonzero discriminant"
        )));
    }
    let denom = r_wall * 2.0 - a;
    if denom.norm() <= 1e-12 * scale {
        return Err(Error::PoleAtWall(format!("∂_rχ vanishes at the double root r = {}", a / 2.0)));
    }
    let q = (r_wall * eta0 - eta1) / denom;
    let arg = q.arg();
    Ok((arg / (2.0 * std::f64::consts::PI), arg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonasymptoticBound {
    /// `Σ_atoms w ρ_max(λ)^{2k} C_init S`.
    pub measure_resolved: f64,
    /// `ρ̄^{2k} C_init ν([μ,L]) S` with `ρ̄` the worst atom modulus.
    pub uniform: f64,
    pub value: f64,
}

pub fn nonasymptotic_bound(
    coeffs: &MethodCoefficients,
    nu: &SpectralMeasure,
    c_init: f64,
    k: u32,
    stokes_product: f64,
) -> NonasymptoticBound {
    let mut resolved = 0.0;
    let mut rho_bar: f64 = 0.0;
    for &(lam, w) in nu.atoms() {
        let rho = max_root_modulus(coeffs, lam);
        rho_bar = rho_bar.max(rho);
        resolved += w * rho.powi(2 * k as i32);
    }
    let measure_resolved = resolved * c_init * stokes_product;
    let uniform = rho_bar.powi(2 * k as i32) * c_init * nu.total_mass() * stokes_product;
    NonasymptoticBound {
        measure_resolved,
        uniform,
        value: measure_resolved.min(uniform),
    }
}

/// `(Σ_i |c_i|)²` for the modal expansion `y_k = Σ_i c_i r_i^k` of the
/// trajectory started from `state0 = [y_0, y_{−1}, …, y_{−m}]`, so that
/// `|y_k| ≤ (Σ|c_i|) ρ_max^k` for all `k`. Requires distinct multipliers.
pub fn modal_envelope_constant(coeffs: &MethodCoefficients, lambda: f64, state0: &[f64]) -> Result<f64> {
    let c = companion(coeffs, lambda);
    let n = c.nrows();
    if state0.len() != n {
        return Err(Error::InvalidInput(format!("state must have length {n}")));
    }
    let rs = roots(coeffs, lambda);
    // Eigenvectors of a companion matrix are [r^m, …, r, 1].
    let v = nalgebra::DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let r = rs[j];
        if r.norm() == 0.0 {
            if i == n - 1 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        } else {
            r.powi((n - 1 - i) as i32)
        }
    });
    let s = nalgebra::DVector::<Complex64>::from_iterator(n, state0.iter().map(|&x| Complex64::new(x, 0.0)));
    let w = v
        .clone()
        .lu()
        .solve(&s)
        .ok_or_else(|| Error::NumericalError("repeated multipliers: modal basis is singular".into()))?;
    let total: f64 = (0..n).map(|j| (v[(0, j)] * w[j]).norm()).sum();
    if !total.is_finite() {
        return Err(Error::NumericalError("modal expansion overflowed".into()));
    }
    Ok(total * total)
}

/// Noise-free modal trajectory `y_1, …, y_k` from `state0 = [y_0, …, y_{−m}]`.
pub fn modal_trajectory(coeffs: &MethodCoefficients, lambda: f64, state0: &[f64], k: usize) -> Result<Vec<f64>> {
    let alpha = coeffs.recurrence(lambda);
    if state0.len() != alpha.len() {
        return Err(Error::InvalidInput(format!("state must have length {}", alpha.len())));
    }
    let mut state = state0.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let next: f64 = alpha.iter().zip(&state).map(|(a, y)| a * y).sum();
        state.rotate_right(1);
        state[0] = next;
        out.push(next);
    }
    Ok(out)
}

/// Degree-`N` Chebyshev residual polynomial on `[μ, L]`,
/// `p_N(λ) = T_N((L+μ−2λ)/(L−μ)) / T_N((L+μ)/(L−μ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevFilter {
    pub n: usize,
    pub mu: f64,
    pub l: f64,
}

fn cheb_t(n: usize, t: f64) -> f64 {
    if t.abs() <= 1.0 {
        (n as f64 * t.acos()).cos()
    } else {
        let sign = if t < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
        sign * (n as f64 * t.abs().acosh()).cosh()
    }
}

/// `log T_N(t)` for `t > 1`, without overflow.
fn log_cheb_t(n: usize, t: f64) -> f64 {
    let x = n as f64 * t.acosh();
    x + (0.5 * (1.0 + (-2.0 * x).exp())).ln()
}

impl ChebyshevFilter {
    fn t0(&self) -> f64 {
        (self.l + self.mu) / (self.l - self.mu)
    }

    fn t_of(&self, lambda: f64) -> f64 {
        (self.l + self.mu - 2.0 * lambda) / (self.l - self.mu)
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let t = self.t_of(lambda);
        if t.abs() <= 1.0 {
            cheb_t(self.n, t) * (-log_cheb_t(self.n, self.t0())).exp()
        } else {
            let sign = if t < 0.0 && self.n % 2 == 1 { -1.0 } else { 1.0 };
            sign * (log_cheb_t(self.n, t.abs()) - log_cheb_t(self.n, self.t0())).exp()
        }
    }

    /// `1/T_N(t₀)`, the equioscillation level on `[μ, L]`.
    pub fn sup_norm(&self) -> f64 {
        (-log_cheb_t(self.n, self.t0())).exp()
    }

    /// `sup|p_N|^{1/N}` computed in log space.
    pub fn nth_root_rate(&self) -> f64 {
        (-log_cheb_t(self.n, self.t0()) / self.n as f64).exp()
    }

    /// The `N + 1` alternation points `λ_j`, `t_j = cos(jπ/N)`.
    pub fn extremal_points(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|j| {
                let t = (j as f64 * std::f64::consts::PI / self.n as f64).cos();
                0.5 * (self.l + self.mu - (self.l - self.mu) * t)
            })
            .collect()
    }

    /// Power-basis coefficients in `λ`, lowest degree first. Only
    /// well-conditioned for small `N`.
    pub fn coefficients(&self) -> Vec<f64> {
        // t = c0 + c1 λ
        let c1 = -2.0 / (self.l - self.mu);
        let c0 = (self.l + self.mu) / (self.l - self.mu);
        let mut prev = vec![1.0];
        let mut cur = vec![c0, c1];
        if self.n == 0 {
            return prev;
        }
        for _ in 1..self.n {
            let mut next = vec![0.0; cur.len() + 1];
            for (i, &v) in cur.iter().enumerate() {
                next[i] += 2.0 * c0 * v;
                next[i + 1] += 2.0 * c1 * v;
            }
            for (i, &v) in prev.iter().enumerate() {
                next[i] -= v;
            }
            prev = cur;
            cur = next;
        }
        let norm = cheb_t(self.n, self.t0());
        cur.iter().map(|v| v / norm).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevReport {
    pub filter: ChebyshevFilter,
    /// `max |p_N|` over the evaluation grid.
    pub sup_grid: f64,
    /// `max |p_N(λ) − e^{−Nhλ}|` over the grid.
    pub sup_vs_exponential: f64,
}

pub fn chebyshev_filter(n: usize, mu: f64, l: f64, h: f64, grid: usize) -> Result<ChebyshevReport> {
    if n < 1 || !(mu > 0.0 && mu < l) || grid < 2 {
        return Err(Error::InvalidInput(format!("need N ≥ 1, 0 < μ < L, grid ≥ 2 (got {n}, {mu}, {l}, {grid})")));
    }
    let filter = ChebyshevFilter { n, mu, l };
    let mut sup_grid: f64 = 0.0;
    let mut sup_exp: f64 = 0.0;
    for lam in linspace(mu, l, grid) {
        let p = filter.eval(lam);
        sup_grid = sup_grid.max(p.abs());
        sup_exp = sup_exp.max((p - (-(n as f64) * h * lam).exp()).abs());
    }
    Ok(ChebyshevReport {
        filter,
        sup_grid,
        sup_vs_exponential: sup_exp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn char_poly_forms() {
        let c = MethodCoefficients::m1(0.3, 0.1, 0.5).unwrap();
        let lam = 2.0;
        let p = char_poly(&c, lam);
        assert_eq!(p, vec![1.0, -(1.0 - 0.6 + 0.5), 0.5 - 0.2]);
        let gd = MethodCoefficients::gradient_descent(0.3).unwrap();
        assert_eq!(char_poly(&gd, lam), vec![1.0, -(1.0 - 0.6), 0.0]);

        // λ-linearity of the coefficients
        let c3 = MethodCoefficients::new(vec![0.2, -0.1, 0.05, 0.3], vec![0.4, 0.1, -0.2]).unwrap();
        let (p1, p2, p3) = (char_poly(&c3, 1.0), char_poly(&c3, 2.0), char_poly(&c3, 3.0));
        for i in 0..p1.len() {
            assert!((p3[i] - 2.0 * p2[i] + p1[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn companion_matches_poly() {
        let c = MethodCoefficients::new(vec![0.2, -0.1, 0.05, 0.3], vec![0.4, 0.1, -0.2]).unwrap();
        let lam = 1.3;
        let p = char_poly(&c, lam);
        for r in roots(&c, lam) {
            let val = p.iter().fold(Complex64::new(0.0, 0.0), |acc, &co| acc * r + co);
            assert!(val.norm() < 1e-12);
        }
        let m1 = MethodCoefficients::m1(0.3, 0.1, 0.5).unwrap();
        let cm = companion(&m1, 2.0);
        assert_eq!(cm, Matrix::from_row_slice(2, 2, &[0.9, -0.3, 1.0, 0.0]));
        // det C = (−1)^{m+1}(γ_m − η_m λ)
        assert!((cm.determinant() - 0.3).abs() < 1e-15);
        let det3 = companion(&c, lam).determinant();
        assert!((det3 - (-0.2 - 0.3 * lam)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_roots_match_companion() {
        let mut r = rng::rng(42);
        for _ in 0..2000 {
            let c = MethodCoefficients::m1(rng::uniform(&mut r, 0.0, 2.0), rng::uniform(&mut r, -1.0, 1.0), rng::uniform(&mut r, 0.0, 1.0)).unwrap();
            let lam = rng::uniform(&mut r, 0.01, 3.0);
            let mm = modal_multipliers_m1(&c, lam).unwrap();
            let a = sorted(mm.roots.clone());
            let b = sorted(roots(&c, lam));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-12, "{x} vs {y}");
            }
            if mm.oscillatory {
                let b = c.gamma()[0] - c.eta()[1] * lam;
                assert!((mm.roots[0].norm_sqr() - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_descent_roots_and_jury() {
        let gd = MethodCoefficients::gradient_descent(0.5).unwrap();
        let mm = modal_multipliers_m1(&gd, 1.0).unwrap();
        let mut re: Vec<f64> = mm.roots.iter().map(|r| r.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(re, vec![0.0, 0.5]);
        for (lam, stable) in [(0.1, true), (3.9, true), (4.0, false), (4.1, false)] {
            assert_eq!(jury_stable_m1(&gd, lam).unwrap(), stable, "λ = {lam}");
        }
        // a = 0, b = 1: marginal
        let marginal = MethodCoefficients::m1(2.0, 0.0, 1.0).unwrap();
        assert!(!jury_stable_m1(&marginal, 1.0).unwrap());
    }

    #[test]
    fn jury_agrees_with_root_moduli() {
        let mut r = rng::rng(7);
        let mut checked = 0;
        for _ in 0..10_000 {
            let c = MethodCoefficients::m1(rng::uniform(&mut r, -0.5, 2.5), rng::uniform(&mut r, -1.0, 1.0), rng::uniform(&mut r, -1.0, 1.5)).unwrap();
            let lam = rng::uniform(&mut r, 0.01, 2.0);
            let rho = modal_multipliers_m1(&c, lam).unwrap().rho_max;
            if (rho - 1.0).abs() < 1e-8 {
                continue;
            }
            checked += 1;
            assert_eq!(jury_stable_m1(&c, lam).unwrap(), rho < 1.0);
        }
        assert!(checked > 9000);
    }

    #[test]
    fn stability_report_cases() {
        let (mu, l) = (0.1, 2.0);
        let gd = MethodCoefficients::gradient_descent(1.0 / l).unwrap();
        let rep = stability_report(&gd, mu, l, 101).unwrap();
        assert!(rep.schur_stable);
        assert!((rep.rho_bar - (1.0 - mu / l)).abs() < 1e-12);
        let bad = MethodCoefficients::gradient_descent(3.0 / l).unwrap();
        let rep = stability_report(&bad, mu, l, 101).unwrap();
        assert!(!rep.schur_stable);
        assert_eq!(*rep.violations.last().unwrap(), l);
    }

    #[test]
    fn endpoint_certificate_implies_grid_stability() {
        let mut r = rng::rng(19);
        for _ in 0..500 {
            let c = MethodCoefficients::m1(rng::uniform(&mut r, 0.0, 1.5), rng::uniform(&mut r, -0.5, 0.5), rng::uniform(&mut r, 0.0, 0.95)).unwrap();
            if jury_endpoints_m1(&c, 0.2, 1.5).unwrap() {
                assert!(stability_report(&c, 0.2, 1.5, 200).unwrap().schur_stable);
            }
        }
    }

    #[test]
    fn bulk_exponent_cases() {
        let gd = MethodCoefficients::gradient_descent(0.5).unwrap();
        let nu = SpectralMeasure::new(vec![(1.0, 1.0)], 1.0, 1.0).unwrap();
        assert!((bulk_exponent(&gd, &nu).unwrap() - 2f64.ln()).abs() < 1e-14);

        let hb = MethodCoefficients::m1(0.5, 0.1, 0.8).unwrap();
        let lam = 1.0;
        assert!(modal_multipliers_m1(&hb, lam).unwrap().oscillatory);
        let nu = SpectralMeasure::new(vec![(lam, 2.0)], 0.5, 2.0).unwrap();
        let want = 2.0 * (1.0 / (0.8 - 0.1 * lam)).ln();
        assert!((bulk_exponent(&hb, &nu).unwrap() - want).abs() < 1e-12);
        let twice = SpectralMeasure::new(vec![(lam, 1.0), (lam, 1.0)], 0.5, 2.0).unwrap();
        assert!((bulk_exponent(&hb, &twice).unwrap() - bulk_exponent(&hb, &nu).unwrap()).abs() < 1e-14);

        let unstable = MethodCoefficients::gradient_descent(3.0).unwrap();
        assert!(matches!(bulk_exponent(&unstable, &nu), Err(Error::Unstable(_))));
    }

    #[test]
    fn theta_prime_matches_finite_differences() {
        let c = MethodCoefficients::m1(1.0, 0.5, 0.9).unwrap();
        let (lo, hi) = oscillatory_interval_m1(&c).unwrap().unwrap();
        for lam in linspace(lo + 0.05, hi - 0.05, 25) {
            let fd = (theta_m1(&c, lam + 1e-5).unwrap() - theta_m1(&c, lam - 1e-5).unwrap()) / 2e-5;
            assert!((theta_prime_m1(&c, lam).unwrap() - fd).abs() < 1e-6);
        }
        assert!(matches!(theta_prime_m1(&c, hi + 1.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn stationary_point_example() {
        let c = MethodCoefficients::m1(1.0, 0.5, 0.9).unwrap();
        let star = stationary_lambda_m1(&c).unwrap().unwrap();
        assert!((star - 1.7).abs() < 1e-14);
        assert!(modal_multipliers_m1(&c, star).unwrap().oscillatory);
        assert!(theta_prime_m1(&c, star).unwrap().abs() < 1e-10);
        // sign change across λ*
        let left = theta_prime_m1(&c, star - 0.05).unwrap();
        let right = theta_prime_m1(&c, star + 0.05).unwrap();
        assert!(left * right < 0.0);
        let pts = stationary_points_m1(&c, 0.5, 3.0).unwrap();
        assert_eq!(pts[0].kind, StationaryKind::Interior);
        assert_eq!(pts.len(), 3);
        // no interior point when η₁ = 0
        let hb = MethodCoefficients::heavy_ball(0.5, 0.8).unwrap();
        assert!(stationary_lambda_m1(&hb).unwrap().is_none());
        // band excluding λ*
        let pts = stationary_points_m1(&c, 2.0, 3.0).unwrap();
        assert!(pts.iter().all(|p| p.kind == StationaryKind::Endpoint));
    }

    #[test]
    fn airy_amplitude_cases() {
        let c = MethodCoefficients::m1(1.0, 0.5, 0.9).unwrap();
        let (amp, phase) = airy_amplitude(&c, 1.7).unwrap();
        assert!(amp.is_finite() && amp > 0.0);
        assert_eq!(phase, std::f64::consts::FRAC_PI_4);
        // Independent second difference of ϑ itself.
        let h = 1e-4;
        let t2 = (theta_m1(&c, 1.7 + h).unwrap() - 2.0 * theta_m1(&c, 1.7).unwrap() + theta_m1(&c, 1.7 - h).unwrap()) / (h * h);
        let rho = (0.9f64 - 0.85).sqrt();
        let want = (rho / (1.0 - rho * rho)).sqrt() / (std::f64::consts::PI * t2.abs()).sqrt();
        assert!((amp - want).abs() < 1e-4 * want);
    }

    #[test]
    fn stokes_jump_cases() {
        // |r| = 1 wall: γ₁ − η₁λ = 1 with γ₁ = 0.5, η₁ = −0.5, λ = 1.
        let c = MethodCoefficients::m1(0.8, -0.5, 0.5).unwrap();
        let mm = modal_multipliers_m1(&c, 1.0).unwrap();
        let r = mm.roots[0];
        assert!((r.norm() - 1.0).abs() < 1e-12);
        let (log_abs, arg) = stokes_jump_m1(&c, 1.0, r).unwrap();
        let q = (r * 0.8 + 0.5) / (r * 2.0 - c.a(1.0));
        let oracle = q.ln().im;
        assert!((arg - oracle).abs() < 1e-14);
        assert!((log_abs - oracle / (2.0 * std::f64::consts::PI)).abs() < 1e-14);

        // double root: pole
        let d = MethodCoefficients::m1(0.5, 0.0, 0.25).unwrap();
        // Δ(λ) = (1.25 − 0.5λ)² − 1 = 0 at λ = 0.5
        let a = d.a(0.5);
        assert!(matches!(stokes_jump_m1(&d, 0.5, Complex64::new(a / 2.0, 0.0)), Err(Error::PoleAtWall(_))));
        // interior point
        let hb = MethodCoefficients::heavy_ball(0.5, 0.5).unwrap();
        let r = modal_multipliers_m1(&hb, 1.0).unwrap().roots[0];
        assert!(matches!(stokes_jump_m1(&hb, 1.0, r), Err(Error::NotAWall(_))));
        // real positive ratio: r = 1 on the wall of GD-like method at λ = 0
        let real = MethodCoefficients::m1(1.0, -1.0, 0.0).unwrap();
        // λ = 1: a = 0, b = 1 → roots ±i; pick a case with real r = −1 instead
        let _ = real;
        let hb2 = MethodCoefficients::m1(2.0, 0.0, 0.5).unwrap();
        // λ = 1.25: a = −1, b = 0.5 → r² + r + 0.5 = 0 (complex), not on circle; use λ = 1.5: a = −1.5, b = 0.5 → r = −1, −0.5
        let (la, _) = stokes_jump_m1(&hb2, 1.5, Complex64::new(-1.0, 0.0)).unwrap();
        // q = (−2)/(−2 + 1.5) = 4 > 0
        assert_eq!(la, 0.0);
    }

    #[test]
    fn nonasymptotic_bound_cases() {
        let gd = MethodCoefficients::gradient_descent(0.25).unwrap();
        let nu = SpectralMeasure::new(vec![(1.0, 1.0)], 1.0, 1.0).unwrap();
        let b0 = nonasymptotic_bound(&gd, &nu, 3.0, 0, 1.0);
        assert_eq!(b0.value, 3.0);
        let b = nonasymptotic_bound(&gd, &nu, 3.0, 7, 1.0);
        assert!((b.value - 0.75f64.powi(14) * 3.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_constant_bounds_trajectory() {
        let mut r = rng::rng(77);
        for _ in 0..50 {
            let c = MethodCoefficients::m1(rng::uniform(&mut r, 0.1, 1.0), rng::uniform(&mut r, -0.3, 0.3), rng::uniform(&mut r, 0.0, 0.9)).unwrap();
            let lam = rng::uniform(&mut r, 0.1, 1.5);
            let rho = max_root_modulus(&c, lam);
            if rho >= 1.0 {
                continue;
            }
            let s0 = [rng::normal(&mut r), rng::normal(&mut r)];
            let k0 = modal_envelope_constant(&c, lam, &s0).unwrap();
            let traj = modal_trajectory(&c, lam, &s0, 200).unwrap();
            assert!(s0[0] * s0[0] <= k0 * (1.0 + 1e-12));
            for (i, y) in traj.iter().enumerate() {
                assert!(y * y <= k0 * rho.powi(2 * (i as i32 + 1)) * (1.0 + 1e-9) + 1e-300);
            }
        }
    }

    #[test]
    fn chebyshev_cases() {
        let (mu, l) = (1.0, 10.0);
        let one = chebyshev_filter(1, mu, l, 0.0, 1001).unwrap();
        for lam in [1.0, 3.0, 7.5] {
            assert!((one.filter.eval(lam) - (1.0 - 2.0 * lam / (l + mu))).abs() < 1e-14);
        }
        assert!((one.sup_grid - (l - mu) / (l + mu)).abs() < 1e-14);

        let f = chebyshev_filter(8, mu, l, 0.0, 10_000).unwrap();
        assert!((f.sup_grid - f.filter.sup_norm()).abs() < 1e-10);
        let coeffs = f.filter.coefficients();
        assert!((coeffs[0] - 1.0).abs() < 1e-12);
        let lam = 4.2;
        let horner = coeffs.iter().rev().fold(0.0, |acc, c| acc * lam + c);
        assert!((horner - f.filter.eval(lam)).abs() < 1e-10);

        let pts = f.filter.extremal_points();
        assert_eq!(pts.len(), 9);
        for (j, p) in pts.iter().enumerate() {
            let v = f.filter.eval(*p);
            assert!((v.abs() - f.filter.sup_norm()).abs() < 1e-12);
            assert_eq!(v > 0.0, j % 2 == 0);
        }
    }
}
