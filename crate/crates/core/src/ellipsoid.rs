//! Central-cut ellipsoid method with log-determinant (τ) bookkeeping.
//!
//! `E(x, P) = {y : (y − x)ᵀ P⁻¹ (y − x) ≤ 1}`. Each central cut multiplies
//! `det P` by the dimension-only factor `(n²/(n²−1))^n (1 − 2/(n+1))`, so
//! `log τ = ½ log det P` (up to a constant) drops by [`bulk_shrink`] per step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetrize, Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidState {
    pub x: Vector,
    pub p: Matrix,
    pub logdet_p: f64,
    pub k: usize,
}

fn logdet_chol(p: &Matrix) -> Result<f64> {
    let l = cholesky(p)?;
    Ok(2.0 * l.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

impl EllipsoidState {
    pub fn new(x: Vector, p: Matrix) -> Result<Self> {
        if p.nrows() != x.len() || p.ncols() != x.len() {
            return Err(Error::InvalidInput("P must be n×n for an n-vector center".into()));
        }
        let logdet_p = logdet_chol(&p)?;
        Ok(Self { x, p, logdet_p, k: 0 })
    }

    /// Ball of radius `r` around `x`.
    pub fn ball(x: Vector, r: f64) -> Result<Self> {
        let n = x.len();
        Self::new(x, Matrix::identity(n, n) * (r * r))
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `(y − x)ᵀ P⁻¹ (y − x)`; at most 1 inside the ellipsoid.
    pub fn gauge(&self, y: &Vector) -> Result<f64> {
        let d = y - &self.x;
        let sol = cholesky(&self.p)?.solve(&d);
        Ok(d.dot(&sol))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationOracleResult {
    pub feasible: bool,
    pub g: Option<Vector>,
    /// Optional identifier of the active face that produced the cut.
    pub face: Option<usize>,
}

impl SeparationOracleResult {
    pub fn feasible() -> Self {
        Self {
            feasible: true,
            g: None,
            face: None,
        }
    }

    pub fn cut(g: Vector, face: Option<usize>) -> Self {
        Self {
            feasible: false,
            g: Some(g),
            face,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEntry {
    pub k: usize,
    /// `½(log det P_{k+1} − log det P_k)`.
    pub delta_log_tau_bulk: f64,
    /// Jump recorded when a switch is detected at this step; `None` otherwise
    /// or when the jump is undefined (pole or orthogonal cuts).
    pub switch_jump: Option<f64>,
    pub switched: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TauLedger {
    pub entries: Vec<TauEntry>,
}

impl TauLedger {
    pub fn bulk_total(&self) -> f64 {
        self.entries.iter().map(|e| e.delta_log_tau_bulk).sum()
    }

    pub fn switch_total(&self) -> f64 {
        self.entries.iter().filter_map(|e| e.switch_jump).sum()
    }

    pub fn switches(&self) -> usize {
        self.entries.iter().filter(|e| e.switched).count()
    }
}

/// `n log(n²/(n²−1)) + log(1 − 2/(n+1))`, the per-step change of `log det P`.
pub fn logdet_step(n: usize) -> f64 {
    let nf = n as f64;
    nf * (nf * nf / (nf * nf - 1.0)).ln() + (1.0 - 2.0 / (nf + 1.0)).ln()
}

/// Per-step `Δ log τ = ½ logdet_step(n)`; always below `−1/(2n+2)`.
pub fn bulk_shrink(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n ≥ 2, got {n}")));
    }
    Ok(0.5 * logdet_step(n))
}

/// One central cut along `g`.
pub fn ellipsoid_step(state: &EllipsoidState, g: &Vector) -> Result<EllipsoidState> {
    let n = state.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n ≥ 2, got {n}")));
    }
    if g.len() != n || g.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidInput("cut direction must be a nonzero n-vector".into()));
    }
    let pg = &state.p * g;
    let gpg = g.dot(&pg);
    if !(gpg > 0.0) || !gpg.is_finite() {
        return Err(Error::NumericalError(format!("gᵀPg = {gpg} is not positive")));
    }
    let b = pg / gpg.sqrt();
    let nf = n as f64;
    let x = &state.x - &b * (1.0 / (nf + 1.0));
    let p = symmetrize(&((&state.p - &b * b.transpose() * (2.0 / (nf + 1.0))) * (nf * nf / (nf * nf - 1.0))));
    let logdet_p = logdet_chol(&p)?;
    Ok(EllipsoidState {
        x,
        p,
        logdet_p,
        k: state.k + 1,
    })
}

/// `⌈(2n log(R/r) − stokes_sum) / |logdet_step(n)|⌉`.
pub fn iteration_bound(n: usize, big_r: f64, r: f64, stokes_sum: f64) -> Result<usize> {
    if n < 2 || !(big_r > r && r > 0.0) {
        return Err(Error::InvalidInput(format!("need n ≥ 2 and R > r > 0, got n = {n}, R = {big_r}, r = {r}")));
    }
    let num = 2.0 * n as f64 * (big_r / r).ln() - stokes_sum;
    Ok((num / logdet_step(n).abs()).ceil().max(0.0) as usize)
}

/// `(1/2π) arg(α_n ⟨u₂, u₁⟩ / (a − b))` on the principal branch.
pub fn switch_jump(u1: &Vector, u2: &Vector, a: f64, b: f64, alpha_n: f64) -> Result<f64> {
    if a == b {
        return Err(Error::PoleAtWall(format!("pole positions coincide at {a}")));
    }
    let ratio = alpha_n * u2.dot(u1) / (a - b);
    if ratio == 0.0 || !ratio.is_finite() {
        return Err(Error::DegenerateSwitch(format!("ratio {ratio} has no principal argument")));
    }
    Ok(if ratio > 0.0 { 0.0 } else { 0.5 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRun {
    pub found: bool,
    pub state: EllipsoidState,
    pub ledger: TauLedger,
    /// True when the run ended on the τ stopping rule.
    pub stopped_by_tau: bool,
}

/// Central-cut ellipsoid method from the ball `B(x0, R)`. Stops at the first
/// feasible center, when `½(log det P_N − log det P_0) ≤ −n log(R/r)`, or
/// after `max_iter` cuts. A switch is logged when the cut direction turns by
/// more than 1e−6 rad and the oracle's face tag changes; its jump uses
/// `α_n = 2/(n+1)` and pole positions `⟨u₂, x_prev⟩`, `⟨u₂, x⟩`.
pub fn run_feasibility(
    oracle: &dyn Fn(&Vector) -> SeparationOracleResult,
    x0: &Vector,
    big_r: f64,
    r: f64,
    max_iter: usize,
) -> Result<FeasibilityRun> {
    let n = x0.len();
    if n < 2 || !(big_r > r && r > 0.0) {
        return Err(Error::InvalidInput(format!("need n ≥ 2 and R > r > 0, got n = {n}, R = {big_r}, r = {r}")));
    }
    let mut state = EllipsoidState::ball(x0.clone(), big_r)?;
    let logdet0 = state.logdet_p;
    let target = -(n as f64) * (big_r / r).ln();
    let alpha_n = 2.0 / (n as f64 + 1.0);
    let mut ledger = TauLedger::default();
    let mut prev: Option<(Vector, Option<usize>, Vector)> = None;

    loop {
        let res = oracle(&state.x);
        if res.feasible {
            return Ok(FeasibilityRun {
                found: true,
                state,
                ledger,
                stopped_by_tau: false,
            });
        }
        if 0.5 * (state.logdet_p - logdet0) <= target + 1e-12 {
            return Ok(FeasibilityRun {
                found: false,
                state,
                ledger,
                stopped_by_tau: true,
            });
        }
        if state.k >= max_iter {
            return Ok(FeasibilityRun {
                found: false,
                state,
                ledger,
                stopped_by_tau: false,
            });
        }
        let g = res
            .g
            .filter(|g| g.len() == n && g.iter().any(|v| *v != 0.0))
            .ok_or_else(|| Error::OracleContractViolation(format!("no nonzero cut at infeasible point (k = {})", state.k)))?;
        let u = g.normalize();

        let mut switched = false;
        let mut jump = None;
        if let Some((u_prev, face_prev, x_prev)) = &prev {
            let angle = u_prev.dot(&u).clamp(-1.0, 1.0).acos();
            let face_changed = matches!((face_prev, res.face), (Some(a), Some(b)) if *a != b);
            if angle > 1e-6 && face_changed {
                switched = true;
                jump = switch_jump(u_prev, &u, u.dot(x_prev), u.dot(&state.x), alpha_n).ok();
            }
        }

        let next = ellipsoid_step(&state, &g)?;
        ledger.entries.push(TauEntry {
            k: state.k,
            delta_log_tau_bulk: 0.5 * (next.logdet_p - state.logdet_p),
            switch_jump: jump,
            switched,
        });
        prev = Some((u, res.face, state.x.clone()));
        state = next;
    }
}

/// Polytope `{x : a_iᵀx ≤ b_i}` with a most-violated-constraint oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub normals: Vec<Vector>,
    pub offsets: Vec<f64>,
}

impl Polytope {
    /// Random polytope with `faces` unit normals that contains `B(center, r)`.
    pub fn random_around(rng: &mut crate::rng::FlatRng, center: &Vector, r: f64, faces: usize) -> Self {
        let n = center.len();
        let mut normals = Vec::with_capacity(faces);
        let mut offsets = Vec::with_capacity(faces);
        for _ in 0..faces {
            let a = crate::rng::unit_vector(rng, n);
            offsets.push(a.dot(center) + r * crate::rng::uniform(rng, 1.0, 1.5));
            normals.push(a);
        }
        Self { normals, offsets }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.normals.iter().zip(&self.offsets).all(|(a, b)| a.dot(x) <= *b)
    }

    pub fn oracle(&self, x: &Vector) -> SeparationOracleResult {
        let worst = self
            .normals
            .iter()
            .zip(&self.offsets)
            .enumerate()
            .map(|(i, (a, b))| (i, a.dot(x) - b))
            .max_by(|p, q| p.1.partial_cmp(&q.1).unwrap());
        match worst {
            Some((i, v)) if v > 0.0 => SeparationOracleResult::cut(self.normals[i].clone(), Some(i)),
            _ => SeparationOracleResult::feasible(),
        }
    }
}

/// Oracle for the ball `B(center, radius)`.
pub fn ball_oracle(center: Vector, radius: f64) -> impl Fn(&Vector) -> SeparationOracleResult {
    move |x: &Vector| {
        let d = x - &center;
        if d.norm() <= radius {
            SeparationOracleResult::feasible()
        } else {
            SeparationOracleResult::cut(d, None)
        }
    }
}
