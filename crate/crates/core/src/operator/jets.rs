use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutator, Matrix};

/// Highest degree of the hard-coded Dynkin expansion.
pub const MAX_BCH_ORDER: usize = 4;

/// Truncated formal logarithm `Σ_{k=1}^{order} h^k X_k`.
///
/// `coeffs[k − 1]` holds the coefficient of `h^k`; there is no constant term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetSeries {
    coeffs: Vec<Matrix>,
}

impl JetSeries {
    pub fn new(coeffs: Vec<Matrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidInput("jet series needs at least one coefficient".into()))?;
        let n = first.nrows();
        if coeffs.iter().any(|c| c.nrows() != n || c.ncols() != n) {
            return Err(Error::InvalidInput(
                "jet coefficients must be square with a common dimension".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    /// Jet of `−log(I + hG)` truncated at `order`: coefficient `(−1)^k G^k / k`.
    pub fn resolvent_log(gen: &Matrix, order: usize) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(order);
        let mut pow = gen.clone();
        for k in 1..=order {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs.push(&pow * (sign / k as f64));
            pow = &pow * gen;
        }
        Self::new(coeffs)
    }

    /// Jet of `−hG` (exponential-type channel).
    pub fn linear(gen: &Matrix) -> Self {
        Self {
            coeffs: vec![-gen.clone()],
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn coeffs(&self) -> &[Matrix] {
        &self.coeffs
    }

    /// Coefficient of `h^k` (zero beyond the stored order).
    pub fn coeff(&self, k: usize) -> Matrix {
        assert!(k >= 1, "jet degrees start at 1");
        self.coeffs
            .get(k - 1)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(self.dim(), self.dim()))
    }

    pub fn eval(&self, h: f64) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        let mut hk = 1.0;
        for c in &self.coeffs {
            hk *= h;
            out += c * hk;
        }
        out
    }
}

type Series = Vec<Matrix>;

fn truncated(x: &JetSeries, order: usize) -> Series {
    (1..=order).map(|k| x.coeff(k)).collect()
}

fn add(a: &Series, b: &Series, scale: f64) -> Series {
    a.iter().zip(b).map(|(x, y)| x + y * scale).collect()
}

fn bracket(a: &Series, b: &Series) -> Series {
    let order = a.len();
    let n = a[0].nrows();
    let mut out = vec![Matrix::zeros(n, n); order];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            // degrees (i+1) + (j+1) → index i+j+1
            let idx = i + j + 1;
            if idx < order {
                out[idx] += commutator(ai, bj);
            }
        }
    }
    out
}

/// Coefficients of `log(exp X · exp Y)` through `h^order` (Dynkin expansion to degree four).
pub fn bch_compose(x: &JetSeries, y: &JetSeries, order: usize) -> Result<JetSeries> {
    if order > MAX_BCH_ORDER {
        return Err(Error::Unsupported(format!(
            "BCH composition is hard-coded through degree {MAX_BCH_ORDER}, asked for {order}"
        )));
    }
    if order == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::InvalidInput("jet dimensions differ".into()));
    }
    let xs = truncated(x, order);
    let ys = truncated(y, order);
    let xy = bracket(&xs, &ys);
    let x_xy = bracket(&xs, &xy);
    let y_xy = bracket(&ys, &xy);
    let y_x_xy = bracket(&ys, &x_xy);

    let mut z = add(&xs, &ys, 1.0);
    z = add(&z, &xy, 0.5);
    z = add(&z, &x_xy, 1.0 / 12.0);
    z = add(&z, &y_xy, -1.0 / 12.0);
    z = add(&z, &y_x_xy, -1.0 / 24.0);
    JetSeries::new(z)
}

/// Largest `m ≤ alpha` such that every mixed bracket `[X_k, Y_l]` with
/// `k + l ≤ m` has Frobenius norm at most `tol`.
pub fn jet_flatness_order(x: &JetSeries, y: &JetSeries, alpha: usize, tol: f64) -> usize {
    let mut flat = alpha.min(1);
    for m in 2..=alpha {
        let ok = (1..m).all(|k| {
            (1..=(m - k)).all(|l| commutator(&x.coeff(k), &y.coeff(l)).norm() <= tol)
        });
        if !ok {
            break;
        }
        flat = m;
    }
    flat
}

/// One-axis energies `(S_t, S_s)` of a trajectory of jets evaluated at step `h`:
/// `S_t = Σ‖½[ΔΨ_k, Ω_k]‖²`, `S_s = Σ‖½[Ψ_k, ΔΩ_k]‖²`, with `Ω` from the
/// drift jets and `Ψ` from the diffusion jets.
pub fn axis_energies(jets_t: &[JetSeries], jets_s: &[JetSeries], h: f64) -> Result<(f64, f64)> {
    if jets_t.len() != jets_s.len() {
        return Err(Error::InvalidInput(format!(
            "axis jet lists differ in length: {} vs {}",
            jets_t.len(),
            jets_s.len()
        )));
    }
    if jets_t.len() < 2 {
        return Err(Error::InvalidInput("need at least two steps".into()));
    }
    let omega: Vec<Matrix> = jets_t.iter().map(|j| j.eval(h)).collect();
    let psi: Vec<Matrix> = jets_s.iter().map(|j| j.eval(h)).collect();
    let mut s_t = 0.0;
    let mut s_s = 0.0;
    for k in 0..omega.len() - 1 {
        let d_psi = &psi[k + 1] - &psi[k];
        let d_omega = &omega[k + 1] - &omega[k];
        s_t += (commutator(&d_psi, &omega[k]) * 0.5).norm_squared();
        s_s += (commutator(&psi[k], &d_omega) * 0.5).norm_squared();
    }
    Ok((s_t, s_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{logspace, loglog_slope};
    use crate::operator::expm;
    use crate::rng;
    use crate::Vector;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(v))
    }

    #[test]
    fn commuting_degree_one_composes_additively() {
        let x = JetSeries::new(vec![diag(&[1.0, 2.0])]).unwrap();
        let y = JetSeries::new(vec![diag(&[-3.0, 0.5])]).unwrap();
        let z = bch_compose(&x, &y, 3).unwrap();
        assert_eq!(z.coeff(1), diag(&[-2.0, 2.5]));
        assert_eq!(z.coeff(2).norm(), 0.0);
        assert_eq!(z.coeff(3).norm(), 0.0);
    }

    #[test]
    fn degree_two_coefficient() {
        let mut r = rng::rng(5);
        let xs: Vec<Matrix> = (0..2).map(|_| rng::normal_matrix(&mut r, 3, 3)).collect();
        let ys: Vec<Matrix> = (0..2).map(|_| rng::normal_matrix(&mut r, 3, 3)).collect();
        let x = JetSeries::new(xs.clone()).unwrap();
        let y = JetSeries::new(ys.clone()).unwrap();
        let z = bch_compose(&x, &y, 2).unwrap();
        let expected = &xs[1] + &ys[1] + commutator(&xs[0], &ys[0]) * 0.5;
        assert!((z.coeff(2) - expected).norm() < 1e-13);
    }

    #[test]
    fn order_above_four_is_unsupported() {
        let x = JetSeries::new(vec![diag(&[1.0])]).unwrap();
        assert!(matches!(bch_compose(&x, &x, 5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bch_matches_direct_product_to_next_order() {
        let mut r = rng::rng(17);
        let xs: Vec<Matrix> = (0..4).map(|_| rng::normal_matrix(&mut r, 3, 3)).collect();
        let ys: Vec<Matrix> = (0..4).map(|_| rng::normal_matrix(&mut r, 3, 3)).collect();
        let x = JetSeries::new(xs).unwrap();
        let y = JetSeries::new(ys).unwrap();
        for order in 1..=4 {
            let z = bch_compose(&x, &y, order).unwrap();
            let hs = logspace(2e-3, 2e-2, 6);
            let errs: Vec<f64> = hs
                .iter()
                .map(|&h| {
                    // compare against the same truncation of the inputs
                    let xt = JetSeries::new(x.coeffs()[..order].to_vec()).unwrap();
                    let yt = JetSeries::new(y.coeffs()[..order].to_vec()).unwrap();
                    let direct = expm(&xt.eval(h)).unwrap() * expm(&yt.eval(h)).unwrap();
                    (expm(&z.eval(h)).unwrap() - direct).norm()
                })
                .collect();
            let slope = loglog_slope(&hs, &errs);
            assert!(
                (slope - (order as f64 + 1.0)).abs() < 0.15,
                "order {order}: slope {slope}"
            );
        }
    }

    #[test]
    fn flatness_orders() {
        let x = JetSeries::new(vec![diag(&[1.0, 2.0]), diag(&[0.3, 0.1])]).unwrap();
        let y = JetSeries::new(vec![diag(&[4.0, -1.0]), diag(&[2.0, 2.0])]).unwrap();
        assert_eq!(jet_flatness_order(&x, &y, 3, 1e-12), 3);

        let h = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let xn = JetSeries::new(vec![h.clone()]).unwrap();
        let yn = JetSeries::new(vec![e.clone()]).unwrap();
        assert_eq!(jet_flatness_order(&xn, &yn, 3, 1e-12), 1);

        // [X1, Y1] = 0 (Y1 = I) but [X1, Y2] ≠ 0.
        let x2 = JetSeries::new(vec![h.clone(), Matrix::zeros(2, 2)]).unwrap();
        let y2 = JetSeries::new(vec![Matrix::identity(2, 2), e.clone()]).unwrap();
        assert!(commutator(&h, &Matrix::identity(2, 2)).norm() == 0.0);
        assert!(commutator(&h, &e).norm() > 1.0);
        assert_eq!(jet_flatness_order(&x2, &y2, 3, 1e-12), 2);
    }

    #[test]
    fn flatness_predicts_holonomy_order() {
        // X, Y exponential-type with [X1,Y1]=0 and [X1,Y2]≠0: holonomy is O(h³).
        let h = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let x = JetSeries::new(vec![h.clone()]).unwrap();
        let y = JetSeries::new(vec![Matrix::identity(2, 2), e]).unwrap();
        let m = jet_flatness_order(&x, &y, 3, 1e-12);
        let hs = logspace(1e-3, 1e-1, 7);
        let norms: Vec<f64> = hs
            .iter()
            .map(|&s| {
                let (ex, ey) = (expm(&x.eval(s)).unwrap(), expm(&y.eval(s)).unwrap());
                let (ex_inv, ey_inv) = (expm(&(-x.eval(s))).unwrap(), expm(&(-y.eval(s))).unwrap());
                crate::operator::logm(&(ey * ex * ey_inv * ex_inv)).unwrap().norm()
            })
            .collect();
        let slope = loglog_slope(&hs, &norms);
        assert!(slope >= m as f64 - 0.05, "flat order {m}, holonomy slope {slope}");
    }

    #[test]
    fn axis_energies_cases() {
        let a = diag(&[1.0, 2.0]);
        let b = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let constant_t = vec![JetSeries::linear(&a), JetSeries::linear(&a)];
        let constant_s = vec![JetSeries::linear(&b), JetSeries::linear(&b)];
        assert_eq!(axis_energies(&constant_t, &constant_s, 0.1).unwrap(), (0.0, 0.0));

        let commuting_t = vec![JetSeries::linear(&a), JetSeries::linear(&diag(&[3.0, 1.0]))];
        let commuting_s = vec![JetSeries::linear(&diag(&[0.5, 0.0])), JetSeries::linear(&diag(&[2.0, 2.0]))];
        assert_eq!(axis_energies(&commuting_t, &commuting_s, 0.1).unwrap(), (0.0, 0.0));

        // brute-force bracket oracle for a two-step noncommuting family
        let h = 0.2;
        let t_jets = vec![JetSeries::linear(&a), JetSeries::linear(&(&a * 2.0))];
        let s_jets = vec![JetSeries::linear(&b), JetSeries::linear(&(&b + &a))];
        let (om0, om1) = (&a * -h, &a * (-2.0 * h));
        let (ps0, ps1) = (&b * -h, (&b + &a) * -h);
        let want_t = (commutator(&(&ps1 - &ps0), &om0) * 0.5).norm_squared();
        let want_s = (commutator(&ps0, &(&om1 - &om0)) * 0.5).norm_squared();
        let (st, ss) = axis_energies(&t_jets, &s_jets, h).unwrap();
        assert!((st - want_t).abs() < 1e-15 && want_t == 0.0);
        assert!((ss - want_s).abs() < 1e-15 && want_s > 0.0);
    }

    #[test]
    fn axis_energies_length_mismatch() {
        let a = JetSeries::linear(&diag(&[1.0]));
        assert!(axis_energies(&[a.clone(), a.clone()], std::slice::from_ref(&a), 0.1).is_err());
    }
}
