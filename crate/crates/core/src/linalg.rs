//! Dense linear-algebra helpers shared by every subsystem.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative symmetry tolerance used for drift/diffusion generators.
pub const SYMMETRY_RTOL: f64 = 1e-12;

pub fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

pub fn ensure_finite_vec(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has non-finite entries")))
    }
}

pub fn ensure_square(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == a.ncols() && a.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

pub fn ensure_same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "dimension mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

/// `‖A − Aᵀ‖_F ≤ rtol·‖A‖_F`.
pub fn is_symmetric(a: &Matrix, rtol: f64) -> bool {
    a.is_square() && (a - a.transpose()).norm() <= rtol * a.norm().max(f64::MIN_POSITIVE)
}

pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// One-norm (maximum absolute column sum).
pub fn norm1(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    a * b - b * a
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-major vectorisation.
pub fn vec_of(a: &Matrix) -> Vector {
    Vector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// Eigenvalues of a general real matrix.
///
/// The real Schur iteration is capped; when it stalls (it can on matrices very
/// close to a multiple of the identity) it is retried on a fixed orthogonal
/// similarity, then with a looser deflation tolerance.
pub fn eigenvalues(a: &Matrix) -> Vec<Complex64> {
    let n = a.nrows();
    let cap = 100 * n.max(4);
    let collect = |s: nalgebra::Schur<f64, nalgebra::Dyn>| {
        s.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect::<Vec<_>>()
    };
    if let Some(s) = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, cap) {
        return collect(s);
    }
    let q = crate::rng::orthogonal_matrix(&mut crate::rng::rng(0x5eed), n);
    let rotated = q.transpose() * a * &q;
    for eps in [f64::EPSILON, 1e3 * f64::EPSILON, 1e6 * f64::EPSILON] {
        if let Some(s) = nalgebra::Schur::try_new(rotated.clone(), eps, cap) {
            return collect(s);
        }
    }
    vec![Complex64::new(f64::NAN, f64::NAN); n]
}

pub fn spectral_radius(a: &Matrix) -> f64 {
    eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, |m, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) })
}

pub fn sym_eigen(a: &Matrix) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    ensure_finite(a, "matrix")?;
    let eig = SymmetricEigen::try_new(symmetrize(a), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalError("symmetric eigendecomposition failed".into()))?;
    Ok(eig)
}

/// `U f(Λ) Uᵀ` for a symmetric matrix.
pub fn sym_apply(a: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let eig = sym_eigen(a)?;
    let d = Matrix::from_diagonal(&eig.eigenvalues.map(f));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Cholesky-based SPD check with the factor returned on success.
pub fn cholesky(a: &Matrix) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if !a.is_square() || !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NotSpd);
    }
    if !is_symmetric(a, 1e-10) {
        return Err(Error::NotSpd);
    }
    nalgebra::Cholesky::new(symmetrize(a)).ok_or(Error::NotSpd)
}

pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let ch = cholesky(a)?;
    Ok(symmetrize(&ch.inverse()))
}

pub fn inverse(a: &Matrix) -> Option<Matrix> {
    a.clone().lu().try_inverse()
}

/// Minimum-norm least-squares solve through the SVD.
pub fn lstsq(a: &Matrix, b: &Vector) -> Result<Vector> {
    let svd = a.clone().svd(true, true);
    let eps = f64::EPSILON * a.nrows().max(a.ncols()) as f64 * svd.singular_values.max();
    svd.solve(b, eps)
        .map_err(|e| Error::NumericalError(format!("least squares failed: {e}")))
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Log-log slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_slope(&lx, &ly)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
