//! Fourth-order central differences on the periodic grid.
//!
//! `(f[k-2] - 8 f[k-1] + 8 f[k+1] - f[k+2]) / (12 h)`. The stencil is
//! antisymmetric, so on a periodic grid `sum(f * D g) = -sum(g * D f)` holds
//! to rounding; the discrete integration-by-parts identities rely on this.

use super::GridSpec;

/// Partial derivative along x (the `i` index).
pub fn d_x(grid: &GridSpec, v: &[f64]) -> Vec<f64> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let c = 1.0 / (12.0 * grid.h1());
    let mut out = vec![0.0; v.len()];
    for i in 0..n1 {
        let row = |k: usize| &v[((i + n1 + k) % n1) * n2..][..n2];
        let (m2, m1, p1, p2) = (row(n1 - 2), row(n1 - 1), row(1), row(2));
        let o = &mut out[i * n2..(i + 1) * n2];
        for j in 0..n2 {
            o[j] = ((m2[j] - p2[j]) + 8.0 * (p1[j] - m1[j])) * c;
        }
    }
    out
}

/// Partial derivative along y (the `j` index).
pub fn d_y(grid: &GridSpec, v: &[f64]) -> Vec<f64> {
    let n2 = grid.n2();
    let c = 1.0 / (12.0 * grid.h2());
    let mut out = vec![0.0; v.len()];
    for (row, o) in v.chunks_exact(n2).zip(out.chunks_exact_mut(n2)) {
        for j in 0..n2 {
            let at = |k: usize| row[(j + n2 + k) % n2];
            o[j] = ((at(n2 - 2) - at(2)) + 8.0 * (at(1) - at(n2 - 1))) * c;
        }
    }
    out
}

/// Partial derivative along coordinate `axis` (0 = x, 1 = y).
pub fn d(grid: &GridSpec, axis: usize, v: &[f64]) -> Vec<f64> {
    if axis == 0 {
        d_x(grid, v)
    } else {
        d_y(grid, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn max_err(grid: &GridSpec, got: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
        let mut e: f64 = 0.0;
        for i in 0..grid.n1() {
            for j in 0..grid.n2() {
                e = e.max((got[grid.idx(i, j)] - exact(grid.x(i), grid.y(j))).abs());
            }
        }
        e
    }

    #[test]
    fn fourth_order_convergence() {
        let f = |x: f64, y: f64| (TAU * x).sin() * (2.0 * TAU * y).cos();
        let fx = |x: f64, y: f64| TAU * (TAU * x).cos() * (2.0 * TAU * y).cos();
        let fy = |x: f64, y: f64| -2.0 * TAU * (TAU * x).sin() * (2.0 * TAU * y).sin();
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = GridSpec::new(n, n, 1.0, 1.0).unwrap();
            let v: Vec<f64> = (0..g.len())
                .map(|k| {
                    let (i, j) = g.ij(k);
                    f(g.x(i), g.y(j))
                })
                .collect();
            errs.push((max_err(&g, &d_x(&g, &v), fx), max_err(&g, &d_y(&g, &v), fy)));
        }
        for w in errs.windows(2) {
            assert!((w[0].0 / w[1].0).log2() >= 3.5);
            assert!((w[0].1 / w[1].1).log2() >= 3.5);
        }
    }

    #[test]
    fn antisymmetric_on_periodic_grid() {
        let g = GridSpec::new(12, 9, 1.3, 0.7).unwrap();
        let a: Vec<f64> = (0..g.len()).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
        let b: Vec<f64> = (0..g.len()).map(|k| ((k * 13) % 7) as f64 * 0.3).collect();
        for axis in 0..2 {
            let lhs: f64 = a.iter().zip(d(&g, axis, &b)).map(|(x, y)| x * y).sum();
            let rhs: f64 = b.iter().zip(d(&g, axis, &a)).map(|(x, y)| x * y).sum();
            assert!((lhs + rhs).abs() < 1e-11);
        }
    }
}
