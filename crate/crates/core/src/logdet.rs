//! Log-determinants at matrix level: Cholesky, Hutchinson trace estimation,
//! stochastic Lanczos quadrature, the Monge–Ampère residual and the
//! multiplicative trust-region determinant calibration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_apply, sym_eigen, Matrix, Vector};
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ProbeKind {
    #[default]
    Rademacher,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub n_probes: usize,
    pub probe_kind: ProbeKind,
    pub seed: u64,
    pub lanczos_steps: usize,
}

impl ProbeConfig {
    pub fn new(n_probes: usize, probe_kind: ProbeKind, seed: u64, lanczos_steps: usize) -> Result<Self> {
        if n_probes < 1 || lanczos_steps < 2 {
            return Err(Error::InvalidInput(format!(
                "need n_probes ≥ 1 and lanczos_steps ≥ 2, got {n_probes} and {lanczos_steps}"
            )));
        }
        Ok(Self {
            n_probes,
            probe_kind,
            seed,
            lanczos_steps,
        })
    }

    /// Probe `index`, seeded from `derive_seed(seed, index)`.
    pub fn probe(&self, index: usize, dim: usize) -> Vector {
        let mut r = rng::rng(rng::derive_seed(self.seed, index as u64));
        match self.probe_kind {
            ProbeKind::Rademacher => Vector::from_fn(dim, |_, _| rng::rademacher(&mut r)),
            ProbeKind::Gaussian => rng::normal_vector(&mut r, dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Probes whose Lanczos run stopped early on `β_j < 1e−14`.
    pub breakdowns: usize,
}

/// `log det A = 2 Σ log L_ii`.
pub fn logdet_chol(a: &Matrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * l.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `(1/N) Σ ⟨z_i, M z_i⟩` over seeded probes; probes run in parallel.
pub fn hutchinson_trace(apply_m: &(dyn Fn(&Vector) -> Vector + Sync), dim: usize, cfg: &ProbeConfig) -> Estimate {
    let samples: Vec<f64> = (0..cfg.n_probes)
        .into_par_iter()
        .map(|i| {
            let z = cfg.probe(i, dim);
            z.dot(&apply_m(&z))
        })
        .collect();
    Estimate {
        estimate: stats::mean(&samples),
        stderr: stats::std_error(&samples),
        breakdowns: 0,
    }
}

/// Lanczos tridiagonalization with full reorthogonalization. Returns the
/// diagonal, off-diagonal and whether it broke down before `steps`.
pub fn lanczos(a: &Matrix, z: &Vector, steps: usize) -> (Vec<f64>, Vec<f64>, bool) {
    let n = a.nrows();
    let steps = steps.min(n);
    let mut basis: Vec<Vector> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta = Vec::with_capacity(steps);
    let mut q = z / z.norm();
    for j in 0..steps {
        let mut w = a * &q;
        let aj = q.dot(&w);
        alpha.push(aj);
        w -= &q * aj;
        if j > 0 {
            w -= &basis[j - 1] * beta[j - 1];
        }
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w -= v * c;
            }
        }
        if j + 1 == steps {
            break;
        }
        let b = w.norm();
        if b < 1e-14 {
            return (alpha, beta, true);
        }
        beta.push(b);
        q = w / b;
    }
    (alpha, beta, false)
}

/// `e₁ᵀ f(T) e₁` for the symmetric tridiagonal `T`.
fn quadrature(alpha: &[f64], beta: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
    let m = alpha.len();
    let t = Matrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = sym_eigen(&t)?;
    Ok((0..m).map(|k| eig.eigenvectors[(0, k)].powi(2) * f(eig.eigenvalues[k])).sum())
}

/// Stochastic Lanczos quadrature estimate of `log det A`: the mean over probes
/// of `‖z‖² e₁ᵀ log(T_m) e₁`.
pub fn slq_logdet(a: &Matrix, cfg: &ProbeConfig) -> Result<Estimate> {
    let n = a.nrows();
    if cfg.lanczos_steps > n {
        return Err(Error::InvalidInput(format!("lanczos_steps {} exceeds dimension {n}", cfg.lanczos_steps)));
    }
    cholesky(a)?;
    let samples: Vec<Result<(f64, bool)>> = (0..cfg.n_probes)
        .into_par_iter()
        .map(|i| {
            let z = cfg.probe(i, n);
            let (alpha, beta, broke) = lanczos(a, &z, cfg.lanczos_steps);
            let q = quadrature(&alpha, &beta, |x| {
                if x > 0.0 {
                    x.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })?;
            if !q.is_finite() {
                return Err(Error::NotSpd);
            }
            Ok((z.norm_squared() * q, broke))
        })
        .collect();
    let samples: Vec<(f64, bool)> = samples.into_iter().collect::<Result<_>>()?;
    let vals: Vec<f64> = samples.iter().map(|s| s.0).collect();
    Ok(Estimate {
        estimate: stats::mean(&vals),
        stderr: stats::std_error(&vals),
        breakdowns: samples.iter().filter(|s| s.1).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaContext {
    pub w: f64,
    pub c: f64,
    pub s_val: f64,
    pub h: Matrix,
}

impl MaContext {
    pub fn new(w: f64, c: f64, s_val: f64, h: Matrix) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInput(format!("weight must be positive, got {w}")));
        }
        cholesky(&h)?;
        Ok(Self { w, c, s_val, h })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }
}

/// `R_MA = log det H − log w + c S`.
pub fn ma_residual(ctx: &MaContext) -> Result<f64> {
    Ok(logdet_chol(&ctx.h)? - ctx.w.ln() + ctx.c * ctx.s_val)
}

/// `r = log w − log det H + c S`, the quantity the trust-region update drives
/// to zero. Its fixed point `log det H = log w + cS` differs from the
/// `R_MA = 0` target unless `cS = 0`.
pub fn residual_printed(ctx: &MaContext) -> Result<f64> {
    Ok(ctx.w.ln() - logdet_chol(&ctx.h)? + ctx.c * ctx.s_val)
}

/// `H⁺ = exp(log H + η r I)`: every log-eigenvalue shifts by `η r`, so
/// `r⁺ = (1 − nη) r`.
pub fn trust_region_update(ctx: &MaContext, eta: f64) -> Result<Matrix> {
    let r = residual_printed(ctx)?;
    let shift = eta * r;
    let updated = sym_apply(&ctx.h, |lam| (lam.ln() + shift).exp())?;
    Ok(crate::linalg::symmetrize(&updated))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_logdet() {
        assert_eq!(logdet_chol(&Matrix::identity(4, 4)).unwrap(), 0.0);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 4.0]));
        assert!((logdet_chol(&d).unwrap() - 4f64.ln()).abs() < 1e-15);
        let mut r = rng::rng(1);
        let eigs: Vec<f64> = (0..12).map(|_| rng::uniform(&mut r, 0.01, 50.0)).collect();
        let a = rng::spd_with_spectrum(&mut r, &eigs);
        let want: f64 = eigs.iter().map(|e| e.ln()).sum();
        assert!((logdet_chol(&a).unwrap() - want).abs() < 1e-10);
        let bad = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(logdet_chol(&bad), Err(Error::NotSpd)));
    }

    #[test]
    fn hutchinson_exact_cases() {
        let cfg = ProbeConfig::new(16, ProbeKind::Rademacher, 3, 2).unwrap();
        let id = hutchinson_trace(&|z: &Vector| z.clone(), 10, &cfg);
        assert_eq!((id.estimate, id.stderr), (10.0, 0.0));
        let d = Vector::from_fn(7, |i, _| i as f64 + 0.5);
        let diag = hutchinson_trace(&|z: &Vector| z.component_mul(&d), 7, &cfg);
        assert!((diag.estimate - d.sum()).abs() < 1e-12 && diag.stderr < 1e-12);
    }

    #[test]
    fn hutchinson_coverage() {
        let mut r = rng::rng(5);
        let m = rng::symmetric_matrix(&mut r, 12);
        let tr = m.trace();
        let mut covered = 0;
        for seed in 0..1000 {
            let cfg = ProbeConfig::new(50, ProbeKind::Rademacher, seed, 2).unwrap();
            let e = hutchinson_trace(&|z: &Vector| &m * z, 12, &cfg);
            if (e.estimate - tr).abs() <= 3.0 * e.stderr {
                covered += 1;
            }
        }
        assert!(covered >= 980, "{covered}");
    }

    #[test]
    fn slq_cases() {
        let cfg = ProbeConfig::new(8, ProbeKind::Rademacher, 0, 4).unwrap();
        assert!(slq_logdet(&Matrix::identity(6, 6), &cfg).unwrap().estimate.abs() < 1e-14);

        let d = Matrix::from_diagonal(&Vector::from_fn(10, |i, _| i as f64 + 1.0));
        let cfg = ProbeConfig::new(64, ProbeKind::Rademacher, 9, 10).unwrap();
        let e = slq_logdet(&d, &cfg).unwrap();
        let want: f64 = (1..=10).map(|i| (i as f64).ln()).sum();
        assert!((e.estimate - want).abs() <= 3.0 * e.stderr.max(1e-12));

        // Quadrature bias shrinks with the number of Lanczos steps for a fixed probe.
        let mut r = rng::rng(10);
        let eigs: Vec<f64> = (0..40).map(|i| 0.05 + i as f64).collect();
        let a = rng::spd_with_spectrum(&mut r, &eigs);
        let z = rng::normal_vector(&mut r, 40);
        let exact = z.dot(&(sym_apply(&a, f64::ln).unwrap() * &z));
        let err = |m: usize| {
            let (al, be, _) = lanczos(&a, &z, m);
            (z.norm_squared() * quadrature(&al, &be, f64::ln).unwrap() - exact).abs()
        };
        assert!(err(12) < err(8) && err(8) < err(4));
        assert!(err(40) < 1e-9 * exact.abs());
    }

    #[test]
    fn lanczos_breakdown_is_flagged() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1.0, 2.0, 2.0]));
        let cfg = ProbeConfig::new(4, ProbeKind::Rademacher, 1, 4).unwrap();
        let e = slq_logdet(&d, &cfg).unwrap();
        assert_eq!(e.breakdowns, 4);
        assert!((e.estimate - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ma_residual_cases() {
        let mut r = rng::rng(2);
        let h = rng::spd_with_spectrum(&mut r, &[0.5, 2.0, 3.0]);
        let det = h.determinant();
        let (c, s): (f64, f64) = (0.7, 1.3);
        let ctx = MaContext::new(det * (c * s).exp(), c, s, h.clone()).unwrap();
        assert!(ma_residual(&ctx).unwrap().abs() < 1e-12);
        let plain = MaContext::new(det, 0.0, 5.0, h.clone()).unwrap();
        assert!(ma_residual(&plain).unwrap().abs() < 1e-12);
        let scaled = MaContext::new(det, 0.0, 5.0, &h * 2.0).unwrap();
        assert!((ma_residual(&scaled).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn trust_region_contraction() {
        let h = Matrix::identity(2, 2);
        let ctx = MaContext::new(1f64.exp(), 0.0, 0.0, h).unwrap();
        assert!((residual_printed(&ctx).unwrap() - 1.0).abs() < 1e-15);
        let next = MaContext { h: trust_region_update(&ctx, 0.25).unwrap(), ..ctx.clone() };
        assert!((residual_printed(&next).unwrap() - 0.5).abs() < 1e-14);

        let mut r = rng::rng(6);
        let h = rng::spd_with_spectrum(&mut r, &[0.3, 1.0, 4.0, 9.0]);
        let fixed = MaContext::new(h.determinant(), 0.0, 0.0, h.clone()).unwrap();
        assert!((trust_region_update(&fixed, 0.1).unwrap() - &h).norm() < 1e-12);

        let (eta, n) = (0.3, 4.0);
        let mut ctx = MaContext::new(2.0, 0.4, -1.5, h.clone()).unwrap();
        let v0 = sym_eigen(&h).unwrap();
        let mut last = residual_printed(&ctx).unwrap();
        for _ in 0..20 {
            ctx.h = trust_region_update(&ctx, eta).unwrap();
            let cur = residual_printed(&ctx).unwrap();
            assert!((cur - (1.0 - n * eta) * last).abs() < 1e-12 * last.abs().max(1.0));
            assert!(cur.abs() < last.abs());
            last = cur;
        }
        // Same eigenvectors, shifted log-eigenvalues.
        let rot = v0.eigenvectors.transpose() * &ctx.h * &v0.eigenvectors;
        assert!((rot.clone() - Matrix::from_diagonal(&rot.diagonal())).norm() < 1e-10);
        // The printed residual converges to 0 while R_MA converges to 2cS.
        assert!((ma_residual(&ctx).unwrap() - 2.0 * 0.4 * -1.5).abs() < 1e-8);
    }
}
