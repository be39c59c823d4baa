//! Numerical toolkit for two-channel (drift/diffusion) update operators.
//!
//! The crate is organised by subsystem:
//!
//! * [`operator`]: matrix exponential/logarithm, commutators, holonomy of the
//!   elementary rectangle, truncated BCH composition and curvature energies.
//! * [`calibration`]: Sylvester gauge solves, calibrated and curvature-filtered
//!   gradient steps, matrix-free order selection and parallel-sum preconditioning.
//! * [`multistep`]: spectral analysis of general linear m-step methods.
//! * [`stochastic`]: stationary covariances, noise floors and expectation bounds
//!   for the same methods under white gradient noise.
//! * [`ellipsoid`]: central-cut ellipsoid method with log-determinant bookkeeping.
//! * [`logdet`]: Cholesky, Hutchinson and Lanczos-quadrature log-det machinery plus
//!   the Monge-Ampere residual and trust-region determinant calibration.
//! * [`hodge`]: matrix-valued cochains on a rectangular 2-complex and least-squares
//!   gauge reduction.
//! * [`harness`]: seeded experiment runner used by the `flatstep` CLI.

pub mod calibration;
pub mod ellipsoid;
pub mod error;
pub mod harness;
pub mod hodge;
pub mod linalg;
pub mod logdet;
pub mod multistep;
pub mod operator;
pub mod rng;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
