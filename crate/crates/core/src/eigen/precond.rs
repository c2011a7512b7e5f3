//! FFT inverse of the flat discrete operator `sigma - Delta_0`.
//!
//! The symbol matches the composed fourth-order stencil exactly, so for
//! conformal metrics (where `sqrt|g| g^ij = delta^ij`) the stiffness matrix is
//! inverted exactly.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::manifold::GridSpec;

pub struct SpectralSolver {
    grid: GridSpec,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    // eigenvalues of -Delta_0 in FFT order
    symbol: Vec<f64>,
}

fn first_derivative_symbol(k: usize, n: usize, h: f64) -> f64 {
    // The stencil annihilates the constant and the alternating mode exactly;
    // keep those symbols at an exact zero rather than a rounding residue.
    if k == 0 || 2 * k == n {
        return 0.0;
    }
    let theta = std::f64::consts::TAU * k as f64 / n as f64;
    (8.0 * theta.sin() - (2.0 * theta).sin()) / (6.0 * h)
}

impl SpectralSolver {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let (n1, n2) = (grid.n1(), grid.n2());
        let s1: Vec<f64> = (0..n1)
            .map(|k| first_derivative_symbol(k, n1, grid.h1()).powi(2))
            .collect();
        let s2: Vec<f64> = (0..n2)
            .map(|k| first_derivative_symbol(k, n2, grid.h2()).powi(2))
            .collect();
        let mut symbol = Vec::with_capacity(grid.len());
        for a in &s1 {
            for b in &s2 {
                symbol.push(a + b);
            }
        }
        Self {
            grid,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
            symbol,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex<f64>], forward: bool) {
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let (row, col) = if forward {
            (&self.fwd2, &self.fwd1)
        } else {
            (&self.inv2, &self.inv1)
        };
        for r in data.chunks_exact_mut(n2) {
            row.process(r);
        }
        let mut column = vec![Complex::new(0.0, 0.0); n1];
        for j in 0..n2 {
            for i in 0..n1 {
                column[i] = data[i * n2 + j];
            }
            col.process(&mut column);
            for i in 0..n1 {
                data[i * n2 + j] = column[i];
            }
        }
    }

    /// Solves `(sigma - Delta_0) x = r`. With `sigma = 0` the components of
    /// `r` in the kernel of the stencil (constants and, on even grids, the
    /// alternating modes) are discarded.
    pub fn solve(&self, r: &[f64], sigma: f64) -> Vec<f64> {
        let mut data: Vec<Complex<f64>> = r.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        for (c, s) in data.iter_mut().zip(&self.symbol) {
            let d = sigma + s;
            *c = if d != 0.0 { *c / d } else { Complex::new(0.0, 0.0) };
        }
        self.transform(&mut data, false);
        let norm = 1.0 / self.grid.len() as f64;
        data.iter().map(|c| c.re * norm).collect()
    }
}

/// The grid-scale alternating modes `(-1)^i`, `(-1)^j`, `(-1)^(i+j)` (present
/// only along even axes). Together with the constants they span the kernel of
/// the fourth-order first-derivative stencil, so they carry zero Dirichlet
/// energy and would otherwise pose as spurious zero eigenvalues.
pub(crate) fn alternating_modes(grid: &GridSpec) -> Vec<Vec<f64>> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let build = |m: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
        (0..grid.len())
            .map(|k| {
                let (i, j) = grid.ij(k);
                m(i, j)
            })
            .collect()
    };
    let mut modes = Vec::new();
    if n1 % 2 == 0 {
        modes.push(build(&|i, _| sign(i)));
    }
    if n2 % 2 == 0 {
        modes.push(build(&|_, j| sign(j)));
    }
    if n1 % 2 == 0 && n2 % 2 == 0 {
        modes.push(build(&|i, j| sign(i + j)));
    }
    modes
}

/// Euclidean projection of `v` off the alternating modes (see
/// [`alternating_modes`]); used to make right-hand sides consistent with the
/// range of the stiffness matrix.
pub fn remove_alternating_modes(grid: &GridSpec, v: &mut [f64]) {
    let n = grid.len() as f64;
    for m in alternating_modes(grid) {
        let c = v.iter().zip(&m).map(|(x, a)| x * a).sum::<f64>() / n;
        if c != 0.0 {
            v.iter_mut().zip(&m).for_each(|(x, a)| *x -= c * a);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{MetricField, ScalarField};
    use crate::operators::laplace_beltrami;
    use std::f64::consts::TAU;

    #[test]
    fn inverts_the_discrete_flat_operator() {
        let grid = GridSpec::new(16, 12, 1.0, 2.0).unwrap();
        let x = ScalarField::from_fn(grid, |x, y| (TAU * x).sin() * (TAU * y).cos() + (3.0 * TAU * x).cos());
        let lap = laplace_beltrami(&x, &MetricField::flat(grid)).unwrap();
        let sigma = 2.5;
        let r: Vec<f64> = x
            .values()
            .iter()
            .zip(lap.values())
            .map(|(a, b)| sigma * a - b)
            .collect();
        let back = SpectralSolver::new(grid).solve(&r, sigma);
        let err = back
            .iter()
            .zip(x.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn alternating_modes_are_removed_and_smooth_fields_kept() {
        let grid = GridSpec::new(8, 10, 1.0, 1.0).unwrap();
        let smooth = ScalarField::from_fn(grid, |x, y| (TAU * x).cos() + (TAU * y).sin());
        let mut v = smooth.values().to_vec();
        for (k, x) in v.iter_mut().enumerate() {
            let (i, j) = grid.ij(k);
            *x += 0.3 * (-1f64).powi(i as i32) - 0.2 * (-1f64).powi((i + j) as i32);
        }
        remove_alternating_modes(&grid, &mut v);
        let err = v
            .iter()
            .zip(smooth.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-14, "{err}");
        let flat = MetricField::flat(grid);
        let alt = ScalarField::from_fn(grid, |x, _| (x * 8.0).round().rem_euclid(2.0) * 2.0 - 1.0);
        assert!(laplace_beltrami(&alt, &flat).unwrap().max_abs() < 1e-10);
    }
}
