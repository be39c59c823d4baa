//! Gauge calibration of drift/diffusion pairs.
//!
//! Sign conventions: the Sylvester solvers return `Z` with `SZ − ZS = C`.
//! The calibrated normal form `W(I − hS)W⁻¹` with `W = exp(hZ)` absorbs the
//! `h²C` defect when `[Z, S] = C`, i.e. for the solver output on `−C`;
//! [`gauge`] returns that gauge directly.

use std::collections::BTreeMap;

use nalgebra::Schur;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite, ensure_finite_vec, ensure_same_shape, ensure_square, is_symmetric, kron,
    spd_inverse, spectral_norm, sym_eigen, symmetrize, unvec, vec_of, Matrix, Vector,
    SYMMETRY_RTOL,
};
use crate::operator::OperatorPair;

/// Output of a Sylvester solve `SZ − ZS = C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeSolution {
    pub z: Matrix,
    /// `‖SZ − ZS − C‖_F / ‖C‖_F`, recomputed in the original basis
    /// (absolute when `C = 0`).
    pub residual: f64,
    pub damping: f64,
    /// Norm of the part of `C` lying in the centralizer of `S`, which no `Z` can reach.
    pub centralizer_norm: f64,
}

fn sylvester_residual(s: &Matrix, z: &Matrix, c: &Matrix) -> f64 {
    let r = (s * z - z * s - c).norm();
    let cn = c.norm();
    if cn > 0.0 {
        r / cn
    } else {
        r
    }
}

fn check_sylvester_inputs(s: &Matrix, c: &Matrix) -> Result<()> {
    ensure_square(s, "S")?;
    ensure_same_shape(s, c)?;
    ensure_finite(s, "S")?;
    ensure_finite(c, "C")
}

fn resonance_tol(s_norm: f64) -> f64 {
    1e-13 * s_norm.max(1.0)
}

fn damped_divide(c: f64, d: f64, tau: f64) -> f64 {
    let denom = d + tau.copysign(if d == 0.0 { 1.0 } else { d });
    c / denom
}

fn schur_blocks(t: &Matrix) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let scale = t.norm().max(1.0);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Bartels–Stewart solve of `SZ − ZS = C` in the real Schur basis with damped
/// diagonal divisions `Ĉ_ij / ((t_ii − t_jj) + τ·sgn)`, `τ = eps·‖S‖₂`.
///
/// Exactly resonant entries (the centralizer of `S`) are left at zero and their
/// norm is reported. The damping follows the sign of the gap so it never
/// creates a pole.
pub fn sylvester_schur(s: &Matrix, c: &Matrix, eps: f64) -> Result<GaugeSolution> {
    check_sylvester_inputs(s, c)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be nonnegative, got {eps}")));
    }
    let n = s.nrows();
    let s_norm = spectral_norm(s);
    let tau = eps * s_norm;
    let (q, t) = Schur::new(s.clone()).unpack();
    let c_hat = q.transpose() * c * &q;
    let blocks = schur_blocks(&t);
    let tol = resonance_tol(s_norm);

    let mut z_hat = Matrix::zeros(n, n);
    let mut centralizer_sq = 0.0;
    // Row blocks bottom-up, column blocks left to right.
    for &(i0, p) in blocks.iter().rev() {
        for &(j0, q_len) in blocks.iter() {
            let mut rhs = c_hat.view((i0, j0), (p, q_len)).clone_owned();
            if i0 + p < n {
                let t_row = t.view((i0, i0 + p), (p, n - i0 - p));
                let z_below = z_hat.view((i0 + p, j0), (n - i0 - p, q_len));
                rhs -= t_row * z_below;
            }
            if j0 > 0 {
                let z_left = z_hat.view((i0, 0), (p, j0));
                let t_col = t.view((0, j0), (j0, q_len));
                rhs += z_left * t_col;
            }
            if p == 1 && q_len == 1 {
                let d = t[(i0, i0)] - t[(j0, j0)];
                if i0 == j0 || d.abs() <= tol {
                    centralizer_sq += rhs[(0, 0)].powi(2);
                } else {
                    z_hat[(i0, j0)] = damped_divide(rhs[(0, 0)], d, tau);
                }
            } else {
                let t_ii = t.view((i0, i0), (p, p)).clone_owned();
                let t_jj = t.view((j0, j0), (q_len, q_len)).clone_owned();
                let op = kron(&Matrix::identity(q_len, q_len), &t_ii)
                    - kron(&t_jj.transpose(), &Matrix::identity(p, p));
                let svd = op.clone().svd(true, true);
                let cutoff = tau.max(tol);
                let b = vec_of(&rhs);
                let sol = svd
                    .solve(&b, cutoff)
                    .map_err(|e| Error::NumericalError(format!("block Sylvester solve: {e}")))?;
                let reached = &op * &sol;
                centralizer_sq += (b - reached).norm_squared();
                z_hat
                    .view_mut((i0, j0), (p, q_len))
                    .copy_from(&unvec(&sol, p, q_len));
            }
        }
    }
    let z = &q * z_hat * q.transpose();
    ensure_finite(&z, "Z")?;
    Ok(GaugeSolution {
        residual: sylvester_residual(s, &z, c),
        z,
        damping: tau,
        centralizer_norm: centralizer_sq.sqrt(),
    })
}

/// Eigenbasis solve for symmetric `S`: `Z̃_ij = C̃_ij (λ_i − λ_j) / ((λ_i − λ_j)² + τ²)`.
pub fn sylvester_eigen(s: &Matrix, c: &Matrix, tau: f64) -> Result<GaugeSolution> {
    check_sylvester_inputs(s, c)?;
    if !is_symmetric(s, SYMMETRY_RTOL) {
        return Err(Error::InvalidInput("S must be symmetric for the eigen solver".into()));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be nonnegative, got {tau}")));
    }
    let eig = sym_eigen(s)?;
    let u = &eig.eigenvectors;
    let lam = &eig.eigenvalues;
    let n = s.nrows();
    let tol = resonance_tol(spectral_norm(s));
    let solve = |rhs: &Matrix, centralizer_sq: &mut f64| {
        let c_t = u.transpose() * rhs * u;
        let z_t = Matrix::from_fn(n, n, |i, j| {
            let d = lam[i] - lam[j];
            if i == j || d.abs() <= tol {
                *centralizer_sq += c_t[(i, j)].powi(2);
                0.0
            } else {
                c_t[(i, j)] * d / (d * d + tau * tau)
            }
        });
        u * z_t * u.transpose()
    };
    let mut centralizer_sq = 0.0;
    let mut z = solve(c, &mut centralizer_sq);
    if tau == 0.0 {
        // The eigenvectors are orthogonal only to ~1e-12; refinement on the
        // residual recovers the remaining digits of the undamped solve.
        for _ in 0..2 {
            let r = c - (s * &z - &z * s);
            z += solve(&r, &mut 0.0);
        }
    }
    Ok(GaugeSolution {
        residual: sylvester_residual(s, &z, c),
        z,
        damping: tau,
        centralizer_norm: centralizer_sq.sqrt(),
    })
}

/// Gauge `Z` with `[Z, S] = C` for `S = H + E`, `C = ½[H, E]` (eigen solver, `τ = 0`).
pub fn gauge(pair: &OperatorPair) -> Result<GaugeSolution> {
    let s = pair.sum();
    let c = pair.half_commutator();
    let mut sol = sylvester_eigen(&s, &(-&c), 0.0)?;
    sol.residual = sylvester_residual(&sol.z, &s, &c);
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
    Filtered,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub x_next: Vector,
    pub variant: Variant,
    pub h: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

fn check_step(pair: &OperatorPair, x: &Vector, g: &Vector, h: f64) -> Result<()> {
    if x.len() != pair.dim() || g.len() != pair.dim() {
        return Err(Error::InvalidInput(format!(
            "vector lengths ({}, {}) do not match operator dimension {}",
            x.len(),
            g.len(),
            pair.dim()
        )));
    }
    ensure_finite_vec(x, "x")?;
    ensure_finite_vec(g, "g")?;
    if !h.is_finite() || h < 0.0 {
        return Err(Error::InvalidInput(format!("step h must be nonnegative, got {h}")));
    }
    Ok(())
}

fn finish(x_next: Vector, variant: Variant, h: f64, diagnostics: BTreeMap<String, f64>) -> Result<StepResult> {
    ensure_finite_vec(&x_next, "x_next")?;
    Ok(StepResult {
        x_next,
        variant,
        h,
        diagnostics,
    })
}

/// `v ± hZv + (h²/2)Z²v`.
fn gauge_series(z: &Matrix, v: &Vector, h: f64, sign: f64) -> Vector {
    let zv = z * v;
    let zzv = z * &zv;
    v + zv * (sign * h) + zzv * (0.5 * h * h)
}

/// Variant A: `x⁺ = W(I − hS)W⁻¹(x − hĝ)` with `W^{±1}` applied by the
/// three-term series. `z` should satisfy `[Z, S] = C` (see [`gauge`]).
pub fn calibrated_step_a(
    pair: &OperatorPair,
    x: &Vector,
    g: &Vector,
    h: f64,
    z: &Matrix,
) -> Result<StepResult> {
    check_step(pair, x, g, h)?;
    ensure_same_shape(pair.drift(), z)?;
    let s = pair.sum();
    let v = x - g * h;
    let w_inv_v = gauge_series(z, &v, h, -1.0);
    let inner = &w_inv_v - &s * &w_inv_v * h;
    let x_next = gauge_series(z, &inner, h, 1.0);
    let mut diag = BTreeMap::new();
    diag.insert("gauge_norm".into(), z.norm());
    finish(x_next, Variant::A, h, diag)
}

/// Variant B: `x⁺ = x − hSĝ − h²Cĝ`.
pub fn calibrated_step_b(pair: &OperatorPair, x: &Vector, g: &Vector, h: f64) -> Result<StepResult> {
    check_step(pair, x, g, h)?;
    let s_g = pair.drift() * g + pair.diffusion() * g;
    let c_g = pair.half_commutator() * g;
    let x_next = x - &s_g * h - &c_g * (h * h);
    let mut diag = BTreeMap::new();
    diag.insert("commutator_term_norm".into(), c_g.norm());
    finish(x_next, Variant::B, h, diag)
}

/// Uncalibrated composite `x⁺ = (I − hE)(I − hH)g` applied to `g`.
pub fn plain_composite_step(pair: &OperatorPair, g: &Vector, h: f64) -> Result<StepResult> {
    check_step(pair, g, g, h)?;
    let after_h = g - pair.drift() * g * h;
    let x_next = &after_h - pair.diffusion() * &after_h * h;
    finish(x_next, Variant::Plain, h, BTreeMap::new())
}

/// Curvature-filtered step `x + Δx`, `Δx = −h((H+E)g − s·½(H(Eg) − E(Hg)))`
/// with safeguard `s = min{1, ρ‖(H+E)g‖/‖[H,E]g‖}`. Four matvecs.
pub fn curvature_filtered_step(
    pair: &OperatorPair,
    x: &Vector,
    g: &Vector,
    h: f64,
    rho: f64,
) -> Result<StepResult> {
    check_step(pair, x, g, h)?;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidInput(format!("rho must lie in (0, 1], got {rho}")));
    }
    let hg = pair.drift() * g;
    let eg = pair.diffusion() * g;
    let heg = pair.drift() * &eg;
    let ehg = pair.diffusion() * &hg;
    let sum_g = &hg + &eg;
    let comm_g = &heg - &ehg;
    let comm_norm = comm_g.norm();
    let scale = if comm_norm > 0.0 {
        (rho * sum_g.norm() / comm_norm).min(1.0)
    } else {
        1.0
    };
    let dx = (&sum_g - &comm_g * (0.5 * scale)) * (-h);
    let mut diag = BTreeMap::new();
    diag.insert("safeguard_scale".into(), scale);
    diag.insert("commutator_term_norm".into(), 0.5 * scale * comm_norm);
    diag.insert("norm_hg".into(), hg.norm());
    diag.insert("norm_eg".into(), eg.norm());
    diag.insert("norm_heg".into(), heg.norm());
    diag.insert("norm_ehg".into(), ehg.norm());
    finish(x + dx, Variant::Filtered, h, diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    /// Drift first, then diffusion: `(I − hB)(I − hA)`.
    Dr,
    /// Diffusion first, then drift: `(I − hA)(I − hB)`.
    Rd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub h: f64,
    pub lambda_hat: f64,
    pub delta: f64,
    pub order_chosen: Order,
    pub halvings: usize,
    /// True when the halving cap was hit with `delta > tau_diag`.
    pub capped: bool,
}

pub const DEFAULT_MAX_HALVINGS: usize = 20;

/// Matrix-free stepsize and application-order selection.
///
/// Two power steps on `A + B` from `g/‖g‖` give `λ̂`, then
/// `h = min{h_max, 2(1−σ)/λ̂}` is halved until the finite-`h` order diagnostic
/// `δ = ‖u₁ − u₂‖/(h‖g‖)` is at most `tau_diag` or `max_halvings` is reached.
pub fn select_order(
    apply_a: &dyn Fn(&Vector) -> Vector,
    apply_b: &dyn Fn(&Vector) -> Vector,
    g: &Vector,
    h_max: f64,
    sigma: f64,
    tau_diag: f64,
    max_halvings: usize,
) -> Result<OrderSelection> {
    let g_norm = g.norm();
    if !(g_norm > 0.0 && g_norm.is_finite()) {
        return Err(Error::InvalidInput("g must be nonzero and finite".into()));
    }
    if !(sigma > 0.0 && sigma < 0.5) {
        return Err(Error::InvalidInput(format!("sigma must lie in (0, 1/2), got {sigma}")));
    }
    if !(h_max > 0.0) || !(tau_diag > 0.0) {
        return Err(Error::InvalidInput("h_max and tau_diag must be positive".into()));
    }
    let apply_s = |v: &Vector| apply_a(v) + apply_b(v);
    let mut v = g / g_norm;
    for _ in 0..2 {
        let w = apply_s(&v);
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / wn;
    }
    let lambda_hat = apply_s(&v).dot(&v);
    let mut h = if lambda_hat > 0.0 {
        h_max.min(2.0 * (1.0 - sigma) / lambda_hat)
    } else {
        h_max
    };

    let calls = std::cell::Cell::new(0usize);
    let counted = |f: &dyn Fn(&Vector) -> Vector, v: &Vector| {
        calls.set(calls.get() + 1);
        f(v)
    };
    let mut halvings = 0;
    loop {
        calls.set(0);
        let a_g = g - counted(apply_a, g) * h;
        let u1 = &a_g - counted(apply_b, &a_g) * h;
        let cost_dr = calls.replace(0);
        let b_g = g - counted(apply_b, g) * h;
        let u2 = &b_g - counted(apply_a, &b_g) * h;
        let cost_rd = calls.get();
        let delta = (u1 - u2).norm() / (h * g_norm);
        let order_chosen = if cost_rd < cost_dr { Order::Rd } else { Order::Dr };
        if delta <= tau_diag || halvings >= max_halvings {
            return Ok(OrderSelection {
                h,
                lambda_hat,
                delta,
                order_chosen,
                halvings,
                capped: delta > tau_diag,
            });
        }
        h *= 0.5;
        halvings += 1;
    }
}

fn check_spd(a: &Matrix, name: &str) -> Result<()> {
    ensure_square(a, name)?;
    ensure_finite(a, name)?;
    if !is_symmetric(a, SYMMETRY_RTOL) {
        return Err(Error::InvalidInput(format!("{name} is not symmetric")));
    }
    crate::linalg::cholesky(a).map_err(|_| Error::InvalidInput(format!("{name} is not positive definite")))?;
    Ok(())
}

/// Parallel sum `A□B = (A⁻¹ + B⁻¹)⁻¹`.
pub fn parallel_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_spd(a, "A")?;
    check_spd(b, "B")?;
    ensure_same_shape(a, b)?;
    let inv = spd_inverse(a)? + spd_inverse(b)?;
    Ok(symmetrize(&spd_inverse(&symmetrize(&inv))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveUpdate {
    pub h: Matrix,
    pub e: Matrix,
    /// `G⁺ = H⁺□E⁺`.
    pub g: Matrix,
    /// `‖G⁺⁻¹ − (G⁻¹ − η(H⁻¹ − Ĥ⁻¹) − ζ(E⁻¹ − Ê⁻¹))‖_F`, zero up to rounding.
    pub inverse_form_gap: f64,
    /// Same gap with the `+η, +ζ` signs of the printed recursion.
    pub printed_form_gap: f64,
}

/// Parallel projection `H⁺ = ((1−η)H⁻¹ + ηĤ⁻¹)⁻¹`, `E⁺` likewise with `ζ`.
pub fn adaptive_update(
    h: &Matrix,
    e: &Matrix,
    h_target: &Matrix,
    e_target: &Matrix,
    eta: f64,
    zeta: f64,
) -> Result<AdaptiveUpdate> {
    for (m, name) in [(h, "H"), (e, "E"), (h_target, "H_target"), (e_target, "E_target")] {
        check_spd(m, name)?;
        ensure_same_shape(h, m)?;
    }
    if !(0.0..=1.0).contains(&eta) || !(0.0..=1.0).contains(&zeta) {
        return Err(Error::InvalidInput(format!("eta, zeta must lie in [0, 1], got {eta}, {zeta}")));
    }
    let (h_inv, e_inv) = (spd_inverse(h)?, spd_inverse(e)?);
    let (ht_inv, et_inv) = (spd_inverse(h_target)?, spd_inverse(e_target)?);
    let h_next_inv = &h_inv * (1.0 - eta) + &ht_inv * eta;
    let e_next_inv = &e_inv * (1.0 - zeta) + &et_inv * zeta;
    let h_next = if eta == 1.0 { h_target.clone() } else { symmetrize(&spd_inverse(&symmetrize(&h_next_inv))?) };
    let e_next = if zeta == 1.0 { e_target.clone() } else { symmetrize(&spd_inverse(&symmetrize(&e_next_inv))?) };
    let g_next = parallel_sum(&h_next, &e_next)?;

    let g_inv = &h_inv + &e_inv;
    let g_next_inv = spd_inverse(&g_next)?;
    let dh = &h_inv - &ht_inv;
    let de = &e_inv - &et_inv;
    let corrected = &g_inv - &dh * eta - &de * zeta;
    let printed = &g_inv + &dh * eta + &de * zeta;
    Ok(AdaptiveUpdate {
        h: h_next,
        e: e_next,
        g: g_next,
        inverse_form_gap: (&g_next_inv - corrected).norm(),
        printed_form_gap: (&g_next_inv - printed).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::expm;
    use crate::rng;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(v))
    }

    fn noncommuting_pair(seed: u64, n: usize) -> OperatorPair {
        let mut r = rng::rng(seed);
        let h = rng::symmetric_matrix(&mut r, n);
        let e = rng::symmetric_matrix(&mut r, n);
        OperatorPair::new(h, e).unwrap()
    }

    #[test]
    fn schur_example() {
        let s = diag(&[1.0, 2.0]);
        let c = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let sol = sylvester_schur(&s, &c, 0.0).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!((sol.z - want).norm() < 1e-14);
        assert!(sol.residual <= 1e-14);
        let eig = sylvester_eigen(&s, &c, 0.0).unwrap();
        assert!((eig.z - sylvester_schur(&s, &c, 0.0).unwrap().z).norm() < 1e-12);
    }

    #[test]
    fn zero_rhs_and_resonant_cases() {
        let s = diag(&[1.0, 3.0, 4.0]);
        let sol = sylvester_schur(&s, &Matrix::zeros(3, 3), 1e-3).unwrap();
        assert_eq!(sol.z.norm(), 0.0);

        let c = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let resonant = sylvester_schur(&Matrix::identity(2, 2), &c, 1e-3).unwrap();
        assert!((resonant.residual - 1.0).abs() < 1e-12);
        assert!((resonant.centralizer_norm - c.norm()).abs() < 1e-12);
    }

    #[test]
    fn eigen_damping_limit() {
        let s = diag(&[1.0, 2.0]);
        let c = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let sol = sylvester_eigen(&s, &c, 1e8).unwrap();
        assert!(sol.z.norm() < 1e-7);
    }

    #[test]
    fn random_gapped_spd_solves() {
        let mut r = rng::rng(3);
        for _ in 0..20 {
            let eigs: Vec<f64> = (0..6).map(|i| 0.5 + 0.3 * i as f64).collect();
            let s = rng::spd_with_spectrum(&mut r, &eigs);
            let h = rng::symmetric_matrix(&mut r, 6);
            let e = &s - &h;
            let c = (&h * &e - &e * &h) * 0.5;
            let a = sylvester_eigen(&s, &c, 0.0).unwrap();
            let b = sylvester_schur(&s, &c, 0.0).unwrap();
            assert!(a.residual <= 1e-10, "eigen residual {}", a.residual);
            assert!(b.residual <= 1e-10, "schur residual {}", b.residual);
            assert!((a.z - b.z).norm() <= 1e-10);
        }
    }

    #[test]
    fn schur_handles_complex_pairs() {
        let mut r = rng::rng(11);
        let s = rng::normal_matrix(&mut r, 5, 5);
        let z0 = rng::normal_matrix(&mut r, 5, 5);
        let c = &s * &z0 - &z0 * &s;
        let sol = sylvester_schur(&s, &c, 0.0).unwrap();
        assert!(sol.residual < 1e-9, "residual {}", sol.residual);
    }

    #[test]
    fn gauge_satisfies_bracket_convention() {
        let pair = noncommuting_pair(1, 4);
        let g = gauge(&pair).unwrap();
        let s = pair.sum();
        let lhs = &g.z * &s - &s * &g.z;
        assert!((lhs - pair.half_commutator()).norm() < 1e-9 * pair.half_commutator().norm());
    }

    #[test]
    fn variant_a_degenerates_for_commuting_pair() {
        let pair = OperatorPair::new(diag(&[1.0, 2.0]), diag(&[0.5, -1.0])).unwrap();
        let z = gauge(&pair).unwrap().z;
        assert_eq!(z.norm(), 0.0);
        let x = Vector::from_vec(vec![1.0, -2.0]);
        let g = Vector::from_vec(vec![0.3, 0.7]);
        let h = 0.1;
        let out = calibrated_step_a(&pair, &x, &g, h, &z).unwrap();
        let v = &x - &g * h;
        let want = &v - pair.sum() * &v * h;
        assert!((out.x_next - want).norm() < 1e-15);
        let still = calibrated_step_a(&pair, &x, &g, 0.0, &z).unwrap();
        assert_eq!(still.x_next, x);
    }

    #[test]
    fn variant_b_hand_example() {
        let pair = OperatorPair::new(
            Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        let x = Vector::zeros(2);
        let g = Vector::from_vec(vec![1.0, 0.0]);
        let out = calibrated_step_b(&pair, &x, &g, 0.1).unwrap();
        // S g = (3, 1); HE − EH = [[0, 1], [−1, 0]], so C g = (0, −0.5).
        let want = Vector::from_vec(vec![-0.3, -0.1 + 0.005]);
        assert!((out.x_next - want).norm() < 1e-15);
        assert!((out.diagnostics["commutator_term_norm"] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn variants_agree_to_third_order() {
        let pair = noncommuting_pair(9, 3);
        let z = gauge(&pair).unwrap().z;
        let x = rng::normal_vector(&mut rng::rng(2), 3);
        let hs = crate::linalg::logspace(1e-3, 1e-1, 7);
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let a = calibrated_step_a(&pair, &x, &Vector::zeros(3), h, &z).unwrap();
                let b = calibrated_step_b(&pair, &x, &x, h).unwrap();
                (a.x_next - b.x_next).norm()
            })
            .collect();
        let slope = crate::linalg::loglog_slope(&hs, &errs);
        assert!((slope - 3.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn variant_a_against_linear_normal_form() {
        let pair = noncommuting_pair(4, 5);
        let z = gauge(&pair).unwrap().z;
        let s = pair.sum();
        let x = rng::normal_vector(&mut rng::rng(8), 5);
        let hs = crate::linalg::logspace(1e-3, 1e-1, 7);
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let w = expm(&(&z * h)).unwrap();
                let w_inv = expm(&(&z * -h)).unwrap();
                let reference = &w * (Matrix::identity(5, 5) - &s * h) * w_inv * &x;
                let a = calibrated_step_a(&pair, &x, &Vector::zeros(5), h, &z).unwrap();
                (a.x_next - reference).norm()
            })
            .collect();
        // The h³ remainders of the W and W⁻¹ series cancel.
        let slope = crate::linalg::loglog_slope(&hs, &errs);
        assert!((slope - 4.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn filtered_step_cases() {
        let pair = OperatorPair::new(diag(&[1.0, 2.0]), diag(&[3.0, 4.0])).unwrap();
        let x = Vector::from_vec(vec![1.0, 1.0]);
        let g = Vector::from_vec(vec![1.0, -1.0]);
        let out = curvature_filtered_step(&pair, &x, &g, 0.1, 0.5).unwrap();
        let want = &x - pair.sum() * &g * 0.1;
        assert!((out.x_next - want).norm() < 1e-15);

        // Large commutator relative to (H+E)g: H + E = 0 on g.
        let h = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let pair = OperatorPair::new(h.clone(), e * 1e-3 - &h).unwrap();
        let g = Vector::from_vec(vec![1.0, 2.0]);
        let out = curvature_filtered_step(&pair, &x, &g, 1.0, 0.5).unwrap();
        let sum_norm = (pair.sum() * &g).norm();
        let s = out.diagnostics["safeguard_scale"];
        assert!(s < 1.0);
        assert!((out.diagnostics["commutator_term_norm"] - 0.25 * sum_norm).abs() < 1e-12);
    }

    #[test]
    fn filtered_and_b_commutator_terms_differ_by_step_scaling() {
        let pair = noncommuting_pair(21, 4).scaled(1e-2);
        let x = Vector::zeros(4);
        let g = rng::normal_vector(&mut rng::rng(5), 4);
        let h = 1e-2;
        let f = curvature_filtered_step(&pair, &x, &g, h, 1.0).unwrap();
        assert_eq!(f.diagnostics["safeguard_scale"], 1.0);
        let b = calibrated_step_b(&pair, &x, &g, h).unwrap();
        let s_g = pair.sum() * &g * h;
        let f_comm = &f.x_next + &s_g;
        let b_comm = &b.x_next + &s_g;
        // filtered: +h·½[H,E]g, B: −h²·½[H,E]g
        assert!((f_comm.clone() * h + b_comm.clone()).norm() < 1e-9 * b_comm.norm());
    }

    #[test]
    fn order_selection_rules() {
        let a = diag(&[4.0, 3.0, 1.0]);
        let b = diag(&[6.0, 1.0, 0.5]);
        let g = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let (aa, bb) = (a.clone(), b.clone());
        let sel = select_order(&|v| &aa * v, &|v| &bb * v, &g, 1.0, 0.1, 0.5, 20).unwrap();
        assert!((sel.lambda_hat - 10.0).abs() < 1e-12);
        assert!((sel.h - 0.18).abs() < 1e-12);
        assert_eq!(sel.halvings, 0);
        assert_eq!(sel.order_chosen, Order::Dr);

        let sel = select_order(&|v| &aa * v, &|v| &aa * v, &g, 1.0, 0.1, 1e-12, 20).unwrap();
        assert_eq!(sel.delta, 0.0);
        assert_eq!(sel.halvings, 0);

        assert!(select_order(&|v| &aa * v, &|v| &bb * v, &Vector::zeros(3), 1.0, 0.1, 0.5, 20).is_err());
    }

    #[test]
    fn order_selection_halves_until_diagnostic_passes() {
        let pair = noncommuting_pair(2, 4);
        let a = pair.drift().clone();
        let b = pair.diffusion().clone();
        let g = Vector::from_element(4, 1.0);
        let sel = select_order(&|v| &a * v, &|v| &b * v, &g, 10.0, 0.2, 1e-3, 40).unwrap();
        assert!(sel.delta <= 1e-3);
        assert!(sel.halvings > 0);
        let capped = select_order(&|v| &a * v, &|v| &b * v, &g, 10.0, 0.2, 1e-3, 2).unwrap();
        assert!(capped.capped && capped.halvings == 2);
    }

    #[test]
    fn parallel_sum_examples() {
        let i2 = Matrix::identity(2, 2);
        assert!((parallel_sum(&i2, &i2).unwrap() - &i2 * 0.5).norm() < 1e-15);
        let p = parallel_sum(&diag(&[1.0, 2.0]), &diag(&[2.0, 2.0])).unwrap();
        assert!((p - diag(&[2.0 / 3.0, 1.0])).norm() < 1e-15);
        assert!(parallel_sum(&diag(&[1.0, -1.0]), &i2).is_err());
    }

    #[test]
    fn adaptive_update_cases() {
        let mut r = rng::rng(6);
        let h = rng::spd_with_spectrum(&mut r, &[1.0, 2.0, 3.0]);
        let e = rng::spd_with_spectrum(&mut r, &[0.5, 1.0, 4.0]);
        let ht = rng::spd_with_spectrum(&mut r, &[2.0, 2.0, 5.0]);
        let et = rng::spd_with_spectrum(&mut r, &[1.0, 1.5, 2.0]);
        let same = adaptive_update(&h, &e, &ht, &et, 0.0, 0.0).unwrap();
        assert!((same.h - &h).norm() < 1e-12 && (same.e - &e).norm() < 1e-12);
        let full = adaptive_update(&h, &e, &ht, &et, 1.0, 0.3).unwrap();
        assert_eq!(full.h, ht);
        assert!(full.inverse_form_gap < 1e-10);
        assert!(full.printed_form_gap > 1e-3);
    }

    #[test]
    fn commuting_target_reduces_commutator() {
        let mut r = rng::rng(14);
        let h = rng::spd_with_spectrum(&mut r, &[1.0, 2.0, 4.0, 7.0]);
        let e = rng::spd_with_spectrum(&mut r, &[1.0, 1.5, 3.0, 5.0]);
        // Ê = I + H² commutes with H.
        let e_target = Matrix::identity(4, 4) + &h * &h;
        let before = (&e * &h - &h * &e).norm();
        for zeta in [0.1, 0.2] {
            let up = adaptive_update(&h, &e, &h, &e_target, 0.0, zeta).unwrap();
            let after = (&up.e * &h - &h * &up.e).norm();
            assert!(after < before, "zeta {zeta}: {after} >= {before}");
        }
    }
}
