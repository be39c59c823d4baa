use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, ensure_finite, ensure_square, inverse, norm1, Matrix};

/// Square roots are taken until `‖A − I‖₁` drops below this before the series is applied.
const SERIES_RADIUS: f64 = 0.25;
const MAX_SQRT: usize = 60;

/// Principal matrix logarithm.
///
/// Inverse scaling and squaring: repeated Denman–Beavers square roots bring the
/// argument close to the identity, where `log A = 2 atanh((A − I)(A + I)⁻¹)` is
/// summed as a power series. Inputs already within the series radius skip the
/// square-root stage.
pub fn logm(a: &Matrix) -> Result<Matrix> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    let n = a.nrows();
    let ident = Matrix::identity(n, n);

    let scale = a.amax().max(f64::MIN_POSITIVE);
    for z in eigenvalues(a) {
        let on_cut = z.re <= 0.0 && z.im.abs() <= 1e-12 * scale.max(z.norm());
        if on_cut {
            return Err(Error::BranchError(format!(
                "eigenvalue {:.3e}{:+.3e}i lies on the closed negative real axis",
                z.re, z.im
            )));
        }
    }

    let mut x = a.clone();
    let mut squarings = 0usize;
    while norm1(&(&x - &ident)) > SERIES_RADIUS {
        if squarings == MAX_SQRT {
            return Err(Error::NumericalError(
                "square-root iteration did not approach the identity".into(),
            ));
        }
        x = sqrtm_db(&x)?;
        squarings += 1;
    }

    let y = (&x - &ident) * inverse(&(&x + &ident)).ok_or_else(|| {
        Error::NumericalError("A + I is singular in the logarithm series".into())
    })?;
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut sum = y.clone();
    for k in 1..200 {
        term = &term * &y2;
        let contrib = &term / (2 * k + 1) as f64;
        sum += &contrib;
        if contrib.norm() <= f64::EPSILON * sum.norm().max(f64::MIN_POSITIVE) * 0.1 {
            break;
        }
    }
    Ok(sum * (2.0 * 2f64.powi(squarings as i32)))
}

/// Principal square root by the Denman–Beavers iteration.
fn sqrtm_db(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = Matrix::identity(n, n);
    for _ in 0..100 {
        let yi = inverse(&y).ok_or_else(|| Error::NumericalError("singular iterate".into()))?;
        let zi = inverse(&z).ok_or_else(|| Error::NumericalError("singular iterate".into()))?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta <= 4.0 * f64::EPSILON * y.norm() {
            return Ok(y);
        }
    }
    Err(Error::NumericalError(
        "Denman-Beavers square root did not converge".into(),
    ))
}
