//! Seeded randomness.
//!
//! Every stream is a SplitMix64 generator. Per-replica seeds are derived by
//! `derive_seed(base, index)`, which runs one SplitMix64 output step on
//! `base ^ (index · 0x9E3779B97F4A7C15)`. Normal variates come from
//! `rand_distr::StandardNormal` (ziggurat) on top of that stream.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::linalg::{Matrix, Vector};

pub type FlatRng = SplitMix64;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step.
pub fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix(base ^ index.wrapping_mul(GOLDEN))
}

pub fn rng(seed: u64) -> FlatRng {
    SplitMix64::seed_from_u64(seed)
}

pub fn normal(rng: &mut FlatRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform(rng: &mut FlatRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn rademacher(rng: &mut FlatRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

pub fn normal_vector(rng: &mut FlatRng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| normal(rng))
}

pub fn normal_matrix(rng: &mut FlatRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// Symmetric matrix with i.i.d. normal upper triangle.
pub fn symmetric_matrix(rng: &mut FlatRng, n: usize) -> Matrix {
    let g = normal_matrix(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// Random orthogonal matrix (QR of a Gaussian matrix).
pub fn orthogonal_matrix(rng: &mut FlatRng, n: usize) -> Matrix {
    let g = normal_matrix(rng, n, n);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix `Q diag(eigs) Qᵀ` with a random orthogonal `Q`.
pub fn spd_with_spectrum(rng: &mut FlatRng, eigs: &[f64]) -> Matrix {
    let q = orthogonal_matrix(rng, eigs.len());
    let d = Matrix::from_diagonal(&Vector::from_column_slice(eigs));
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Unit vector with a uniformly random direction.
pub fn unit_vector(rng: &mut FlatRng, n: usize) -> Vector {
    let v = normal_vector(rng, n);
    let nv = v.norm();
    v / nv
}
