//! Numerical laboratory for a six-component extended Brusselator system:
//! two linearly coupled compartments of cubic autocatalytic kinetics with a
//! partially reversible conversion step, posed on a box with homogeneous
//! Dirichlet boundary conditions.
//!
//! The crate simulates the system with a dealiased sine-Galerkin
//! discretization and an integrating-factor time stepper, evaluates the
//! closed-form absorbing-set constants of the underlying dissipativity
//! estimates, verifies the corresponding differential inequalities against
//! trajectories, and estimates attractor dimension two ways: empirically via
//! QR-reorthonormalized tangent dynamics and analytically via the trace
//! condition on time-averaged tangent subspaces.
//!
//! Module map:
//! - [`model`]: physical parameters, pointwise reaction law and Jacobian,
//!   grouping/re-scaling change of variables.
//! - [`spectral`]: sine eigenbasis on boxes, grid/mode transforms, dealiased
//!   nonlinearity projection, norms, numerical embedding constants.
//! - [`integrate`]: integrating-factor IMEX stepping of the Galerkin ODEs
//!   plus an independent finite-difference reference path.
//! - [`bounds`]: absorbing-set constants, decay envelopes, inequality
//!   residuals, verdicts.
//! - [`tangent`]: variational dynamics, Lyapunov exponents, trace averages,
//!   dimension bounds.
//! - [`shell`]: configuration, CLI orchestration, persistence, reports.

// Indexed loops over parallel component arrays are the clearest way to
// write the six-component kernels; the iterator forms obscure them.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]

pub mod bounds;
pub mod error;
pub mod integrate;
pub mod model;
pub mod shell;
pub mod spectral;
pub mod tangent;

pub use error::{Error, Result};
