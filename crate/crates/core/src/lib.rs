//! Numerical laboratory for the first nonzero eigenvalue of the p-Laplacian
//! on a closed surface whose metric evolves by `d/dt g = -2 h`.
//!
//! The surface is a flat-torus chart with an arbitrary SPD metric field
//! ([`manifold`]). [`operators`] supplies the geometric differential
//! operators, [`eigen`] the constrained Rayleigh-quotient solvers, [`flow`]
//! the time integration with its side-condition checks, and [`harness`] the
//! independent checks of the evolution and monotonicity identities.

pub mod cli;
pub mod eigen;
pub mod error;
pub mod flow;
pub mod harness;
pub mod manifold;
pub mod operators;

pub use error::{Error, Result};
