//! Numerical laboratory for self-trapped wave functions of a free particle in
//! one dimension.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: uniform lattices, finite-difference and spectral derivatives,
//!   quadrature.
//! - [`selftrap`]: the nonlinear equation for a quantum potential that traps
//!   its own density, its finite-support solution and the usual comparators.
//! - [`madelung`]: hydrodynamic fields of a wave function (amplitude, quantum
//!   potential, velocity, divergence, force) plus pointwise diagnostics.
//! - [`evolve`]: exact free propagation on a periodic lattice, the analytic
//!   spreading Gaussian, run records and Lagrangian traces.

pub mod error;
pub mod evolve;
pub mod grid;
pub mod madelung;
pub mod selftrap;

pub use error::{Error, Result};
pub use grid::{Backend, ComplexField, Field, Grid, GridMode, RealField};
pub use selftrap::PhysParams;
