//! Numerical toolkit for measuring how well Born-Oppenheimer molecular
//! dynamics reproduces two-state quantum behaviour near crossing and
//! avoided-crossing potential surfaces.
//!
//! The crate is split by role:
//!
//! - [`model`]: two-state matrix potentials, their adiabatic eigen-frames and
//!   closed-form derivatives.
//! - [`eigensolve`]: finite-difference Hamiltonians, a shift-invert Lanczos
//!   eigensolver and the spectral estimators built on its eigenpairs.
//! - [`dynamics`]: symplectic Born-Oppenheimer and Ehrenfest propagators, the
//!   Landau-Zener model and the maximal Lyapunov exponent.
//! - [`estimators`]: the event-driven excited-state estimator, Monte Carlo and
//!   time-average observables and the statistical harnesses around them.

pub mod dynamics;
pub mod eigensolve;
pub mod error;
pub mod estimators;
pub mod model;
pub mod rng;
pub mod stats;

pub use error::{NmdError, Result};
pub use model::{AdiabaticFrame, PotentialSpec, SymMat2};
