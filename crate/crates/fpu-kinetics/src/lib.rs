//! Kinetic theory of the FPU-β chain: the linearized phonon collision
//! operator in closed form, its Galerkin discretization, spectral
//! predictions for current correlations, and direct molecular-dynamics
//! cross-checks.
//!
//! The library is organized bottom-up:
//!
//! * [`dispersion`] — lattice dispersion ω, the collision phase Ω, and the
//!   resolved root manifold h(x, z).
//! * [`quadrature`] — Gauss rules, adaptive Gauss–Kronrod, geometric panel
//!   refinement, Chebyshev interpolation.
//! * [`kernels`] — closed-form collision kernels K₁, K₂, the potential V,
//!   the multiplicative part W, and the constant w₀.
//! * [`discretize`] — graded grids, Galerkin assembly of the operator
//!   matrices, parity splitting, eigendecomposition, file persistence, and
//!   two independent integral oracles.
//! * [`spectral`] — resolvent and correlation predictions, the constant c₀,
//!   power-law fits, zero-mode diagnostics.
//! * [`md`] — microcanonical chain dynamics with canonically sampled initial
//!   data: current autocorrelation and energy spreading.
//! * [`cli`] — the `fpu` command-line front end.

pub mod cli;
pub mod dispersion;
pub mod discretize;
pub mod error;
pub mod kernels;
pub mod md;
pub mod quadrature;
pub mod spectral;

pub use dispersion::{big_omega, h_solve, invariant_residual, omega, omega_prime, parity_reflect};
pub use error::{Error, Result};
