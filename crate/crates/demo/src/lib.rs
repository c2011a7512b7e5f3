//! Browser bindings for a few small `psf-core` computations.
//!
//! Every export has a plain Rust counterpart (`*_impl`) so the logic builds
//! and is tested natively; the `#[wasm_bindgen]` layer only converts errors.

use std::f64::consts::TAU;

use psf_core::eigen::{solve_first_eigen, EigenConfig};
use psf_core::flow::{run_flow, step, FlowKind, FlowParams, FlowSpec, FlowState};
use psf_core::manifold::{GridSpec, MetricField, ScalarField};
use psf_core::operators::conformal_scalar_curvature;
use wasm_bindgen::prelude::*;

const MAX_N: usize = 64;

fn grid(n: usize) -> Result<GridSpec, String> {
    if !(8..=MAX_N).contains(&n) {
        return Err(format!("grid size must lie in 8..={MAX_N}, got {n}"));
    }
    GridSpec::unit(n).map_err(|e| e.to_string())
}

/// Conformal factor `a sin(2 pi x) sin(2 pi y)` on the unit torus.
fn bump(grid: GridSpec, amplitude: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| amplitude * (TAU * x).sin() * (TAU * y).sin())
}

/// First p-eigenpair of the conformal bump metric.
#[wasm_bindgen]
pub struct EigenView {
    lambda: f64,
    iters: usize,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl EigenView {
    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[wasm_bindgen(getter)]
    pub fn iters(&self) -> usize {
        self.iters
    }

    /// Eigenfunction values, row-major `n x n`.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

pub fn solve_eigen_impl(n: usize, amplitude: f64, p: f64) -> Result<EigenView, String> {
    let g = MetricField::conformal(&bump(grid(n)?, amplitude));
    let cfg = EigenConfig { tol_residual: 1e-6, starts: 2, ..EigenConfig::default() };
    let r = solve_first_eigen(&g, p, &cfg, None).map_err(|e| e.to_string())?;
    Ok(EigenView { lambda: r.lambda, iters: r.iters, values: r.u.values().to_vec() })
}

/// Scalar curvature after running 2D Ricci flow from the bump metric to time `t`.
/// Returns `n * n` values, row-major.
pub fn ricci_curvature_impl(n: usize, amplitude: f64, t: f64) -> Result<Vec<f64>, String> {
    if !(t >= 0.0 && t <= 1.0) {
        return Err(format!("time must lie in [0, 1], got {t}"));
    }
    let spec = FlowSpec::new(FlowKind::RicciConformal2D);
    let mut s = FlowState::conformal(&spec, bump(grid(n)?, amplitude)).map_err(|e| e.to_string())?;
    while s.t < t {
        let dt = (0.9 * s.stability_limit(&spec)).min(t - s.t);
        s = step(&s, &spec, dt).map_err(|e| e.to_string())?;
    }
    let u = s.conformal_u.ok_or("conformal factor unavailable")?;
    Ok(conformal_scalar_curvature(&u).values().to_vec())
}

/// `(t, lambda, q)` triples along the calibrated homothety flow, flattened,
/// where `q = lambda (1/psi0 - t)^{alpha p}` with `psi0 = 2 c0` and `alpha = 1/p`.
pub fn lambda_curve_impl(n: usize, amplitude: f64, p: f64, c0: f64, samples: usize) -> Result<Vec<f64>, String> {
    if !(1..=200).contains(&samples) {
        return Err(format!("samples must lie in 1..=200, got {samples}"));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(format!("c0 must be positive, got {c0}"));
    }
    let spec = FlowSpec::new(FlowKind::CalibratedHomothety { c0 });
    let state = FlowState::conformal(&spec, bump(grid(n)?, amplitude)).map_err(|e| e.to_string())?;
    // stop short of the pole at 1 / (2 c0)
    let t_end = 0.8 / (2.0 * c0);
    let mut params = FlowParams::new(t_end, t_end / samples as f64, p, 1.0 / p);
    params.eigen = EigenConfig { tol_residual: 1e-6, starts: 2, ..EigenConfig::default() };
    let trace = run_flow(state, &spec, &params).map_err(|e| e.to_string())?;
    Ok(trace.samples().iter().flat_map(|s| [s.t, s.lambda, s.q_p]).collect())
}

#[wasm_bindgen]
pub fn solve_eigen(n: usize, amplitude: f64, p: f64) -> Result<EigenView, JsError> {
    solve_eigen_impl(n, amplitude, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ricci_curvature(n: usize, amplitude: f64, t: f64) -> Result<Vec<f64>, JsError> {
    ricci_curvature_impl(n, amplitude, t).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lambda_curve(n: usize, amplitude: f64, p: f64, c0: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    lambda_curve_impl(n, amplitude, p, c0, samples).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_eigenvalue() {
        let v = solve_eigen_impl(32, 0.0, 2.0).unwrap();
        assert!((v.lambda - TAU * TAU).abs() < 1e-3 * v.lambda);
        assert_eq!(v.values().len(), 32 * 32);
    }

    #[test]
    fn ricci_flow_smooths_curvature() {
        let r0 = ricci_curvature_impl(24, 0.2, 0.0).unwrap();
        let r1 = ricci_curvature_impl(24, 0.2, 0.01).unwrap();
        let amp = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(amp(&r1) < amp(&r0));
    }

    #[test]
    fn monotone_quantity_does_not_decrease() {
        let curve = lambda_curve_impl(16, 0.1, 3.0, 0.5, 8).unwrap();
        let q: Vec<f64> = curve.chunks(3).map(|c| c[2]).collect();
        assert_eq!(q.len(), 9);
        assert!(q.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-8)));
    }

    #[test]
    fn inputs_are_validated() {
        assert!(solve_eigen_impl(4, 0.1, 2.0).is_err());
        assert!(ricci_curvature_impl(16, 0.1, -1.0).is_err());
        assert!(lambda_curve_impl(16, 0.1, 3.0, 0.0, 8).is_err());
    }
}
