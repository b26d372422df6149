//! Fourier-Galerkin solver for the stochastic third-grade fluid equations on
//! the periodic square, with the diagnostics used to check its energy,
//! stability and invariant-measure estimates.
//!
//! The layers, from the bottom up:
//!
//! - [`model`]: parameters, grid, forcing, analytic constants.
//! - [`spectral`]: coefficients, transforms, projection, norms, snapshots.
//! - [`operators`]: the stress operator `S`, convection, trilinear form.
//! - [`noise`]: finite-rank multiplicative noise and Brownian increments.
//! - [`stepper`]: time stepping, energy ledger, checkpoints.
//! - [`diagnostics`]: ledger residuals, energy inequality, twin-run stability.
//! - [`measure`]: time averages, tails, moment bounds, ergodicity probes.

pub mod diagnostics;
pub mod measure;
pub mod model;
pub mod noise;
pub mod operators;
pub mod spectral;
pub mod stats;
pub mod stepper;
