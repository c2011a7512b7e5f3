//! Discrete closed surface: a flat-torus chart carrying an arbitrary SPD
//! metric, with fields, fourth-order periodic calculus and Riemannian
//! integration.

mod calculus;
mod field;
mod grid;
mod metric;
pub mod snapshot;
pub mod stencil;

pub use calculus::{
    differential, divergence, grad_norm_pow, grad_norm_sq, gradient, inner, integrate, raise,
    volume,
};
pub(crate) use calculus::{covector_norm_sq, pow_half, weighted_sum};
pub use field::{CovectorField, ScalarField, SymTensorField, VectorField};
pub use grid::GridSpec;
pub use metric::{build_metric, generalized_eigenvalues, MetricField};
