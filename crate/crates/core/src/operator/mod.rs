//! Dense operator calculus for drift/diffusion pairs.

mod expm;
mod holonomy;
mod jets;
mod logm;

pub use expm::expm;
pub use holonomy::{curvature_energy, holonomy, HolonomyReport, OperatorPair};
pub use jets::{axis_energies, bch_compose, jet_flatness_order, JetSeries, MAX_BCH_ORDER};
pub use logm::logm;

use crate::error::Result;
use crate::linalg::{ensure_same_shape, ensure_square, Matrix};

/// `[A, B] = AB − BA`.
pub fn commutator(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_square(a, "A")?;
    ensure_same_shape(a, b)?;
    crate::linalg::ensure_finite(a, "A")?;
    crate::linalg::ensure_finite(b, "B")?;
    Ok(crate::linalg::commutator(a, b))
}
