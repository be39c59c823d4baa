use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_same_shape, ensure_square, is_symmetric, Matrix, SYMMETRY_RTOL};

use super::logm;

/// Drift generator `H` and diffusion generator `E`, both symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorPair {
    h: Matrix,
    e: Matrix,
}

impl OperatorPair {
    pub fn new(h: Matrix, e: Matrix) -> Result<Self> {
        ensure_square(&h, "H")?;
        ensure_same_shape(&h, &e)?;
        ensure_finite(&h, "H")?;
        ensure_finite(&e, "E")?;
        if !is_symmetric(&h, SYMMETRY_RTOL) {
            return Err(Error::InvalidInput("H is not symmetric".into()));
        }
        if !is_symmetric(&e, SYMMETRY_RTOL) {
            return Err(Error::InvalidInput("E is not symmetric".into()));
        }
        Ok(Self { h, e })
    }

    pub fn drift(&self) -> &Matrix {
        &self.h
    }

    pub fn diffusion(&self) -> &Matrix {
        &self.e
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `S = H + E`.
    pub fn sum(&self) -> Matrix {
        &self.h + &self.e
    }

    /// Pair with both generators multiplied by `factor` (symmetry is preserved).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            h: &self.h * factor,
            e: &self.e * factor,
        }
    }

    /// `C = ½[H, E]`.
    pub fn half_commutator(&self) -> Matrix {
        (&self.h * &self.e - &self.e * &self.h) * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyReport {
    pub h: f64,
    pub log_hol: Matrix,
    pub leading_commutator: Matrix,
    /// `‖log_hol‖_F²`.
    pub energy: f64,
}

fn resolvent(gen: &Matrix, h: f64, name: &str) -> Result<(Matrix, Matrix)> {
    let n = gen.nrows();
    let shifted = Matrix::identity(n, n) + gen * h;
    let sv = shifted.singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    if !(smin > 1e-13 * smax.max(1.0)) {
        return Err(Error::StepTooLarge(format!(
            "I + h{name} is singular at h = {h} (smallest singular value {smin:e})"
        )));
    }
    let inv = shifted
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::StepTooLarge(format!("I + h{name} is singular at h = {h}")))?;
    Ok((inv, shifted))
}

/// Holonomy of the elementary rectangle for resolvent-type channels
/// `r(h) = (I + hH)⁻¹`, `d(h) = (I + hE)⁻¹`: `log(d r d⁻¹ r⁻¹)`.
pub fn holonomy(pair: &OperatorPair, h: f64) -> Result<HolonomyReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!("step h must be positive, got {h}")));
    }
    let (r, r_inv) = resolvent(pair.drift(), h, "H")?;
    let (d, d_inv) = resolvent(pair.diffusion(), h, "E")?;
    let hol = &d * &r * d_inv * r_inv;
    let log_hol = logm(&hol)?;
    let minus_e = -pair.diffusion();
    let minus_h = -pair.drift();
    let leading_commutator = crate::linalg::commutator(&minus_e, &minus_h) * (h * h);
    let energy = log_hol.norm_squared();
    Ok(HolonomyReport {
        h,
        log_hol,
        leading_commutator,
        energy,
    })
}

/// Sum of `‖log Hol(□)‖_F²` over the reports.
pub fn curvature_energy(reports: &[HolonomyReport]) -> f64 {
    reports.iter().map(|r| r.energy).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{logspace, loglog_slope};
    use crate::Vector;

    fn noncommuting_pair() -> OperatorPair {
        let h = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        OperatorPair::new(h, e).unwrap()
    }

    #[test]
    fn rejects_asymmetric_generators() {
        let h = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(OperatorPair::new(h, Matrix::identity(2, 2)).is_err());
    }

    #[test]
    fn flat_for_commuting_pair() {
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0, 3.0]));
        let e = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.1, 4.0]));
        let rep = holonomy(&OperatorPair::new(h, e).unwrap(), 0.3).unwrap();
        assert!(rep.log_hol.norm() <= 1e-12);
    }

    #[test]
    fn log_holonomy_scales_like_h_squared() {
        let pair = noncommuting_pair();
        let hs = logspace(1e-3, 1e-1, 9);
        let norms: Vec<f64> = hs
            .iter()
            .map(|&h| holonomy(&pair, h).unwrap().log_hol.norm())
            .collect();
        let slope = loglog_slope(&hs, &norms);
        assert!((slope - 2.0).abs() <= 0.05, "slope {slope}");
        // leading term: log_hol / h² → [E, H]
        let rep = holonomy(&pair, 1e-3).unwrap();
        let rel = (&rep.log_hol - &rep.leading_commutator).norm() / rep.leading_commutator.norm();
        assert!(rel < 1e-2, "relative deviation from leading term {rel}");
    }

    #[test]
    fn singular_resolvent_is_step_too_large() {
        let pair = OperatorPair::new(-Matrix::identity(2, 2), Matrix::identity(2, 2)).unwrap();
        assert!(matches!(holonomy(&pair, 1.0), Err(Error::StepTooLarge(_))));
    }

    #[test]
    fn energy_is_additive() {
        let pair = noncommuting_pair();
        let rep = holonomy(&pair, 0.05).unwrap();
        assert_eq!(curvature_energy(&[]), 0.0);
        let one = curvature_energy(std::slice::from_ref(&rep));
        let two = curvature_energy(&[rep.clone(), rep.clone()]);
        assert_eq!(two, 2.0 * one);
        assert!((rep.energy - rep.log_hol.norm_squared()).abs() == 0.0);
    }
}
