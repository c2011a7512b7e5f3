use super::constraint::retract;
use super::precond::{remove_alternating_modes, SpectralSolver};
use super::{canonicalize, random_start, EigenConfig, EigenResult};
use crate::error::{Error, Result};
use crate::manifold::stencil::{d_x, d_y};
use crate::manifold::{integrate, weighted_sum, MetricField, ScalarField};
use crate::operators::{laplace_beltrami, rayleigh_quotient, scalar_curvature_2d};

/// Stiffness action `A x = -d_i(sqrt|g| g^ij d_j x)`, so `-Delta_g = M^{-1} A`
/// with the diagonal mass `M = sqrt|g|`.
fn stiffness(x: &[f64], g: &MetricField) -> Vec<f64> {
    let grid = g.grid();
    let (dx, dy) = (d_x(grid, x), d_y(grid, x));
    let inv = g.inv();
    let sd = g.sqrt_det().values();
    let n = grid.len();
    let (mut f1, mut f2) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let [a, b, c] = inv.at(k);
        f1[k] = sd[k] * (a * dx[k] + b * dy[k]);
        f2[k] = sd[k] * (b * dx[k] + c * dy[k]);
    }
    let (e1, e2) = (d_x(grid, &f1), d_y(grid, &f2));
    e1.iter().zip(&e2).map(|(a, b)| -(a + b)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for a symmetric positive
/// (semi)definite system with a consistent right-hand side.
fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return x;
    }
    let mut z = precond(&r);
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ad = apply(&dir);
        let denom = dot(&dir, &ad);
        if denom <= 0.0 {
            break;
        }
        let alpha = rz / denom;
        for k in 0..x.len() {
            x[k] += alpha * dir[k];
            r[k] -= alpha * ad[k];
        }
        if dot(&r, &r).sqrt() <= rel_tol * b_norm {
            break;
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..dir.len() {
            dir[k] = z[k] + beta * dir[k];
        }
    }
    x
}

const CG_TOL: f64 = 1e-13;

/// Inverse power iteration for `-Delta_g` on the zero-mean subspace.
pub(super) fn solve_laplace(
    g: &MetricField,
    cfg: &EigenConfig,
    warm: Option<&ScalarField>,
) -> Result<EigenResult> {
    let grid = *g.grid();
    let pre = SpectralSolver::new(grid);
    let mut u = match warm {
        Some(w) => retract(w, g, 2.0)?,
        None => random_start(g, 2.0, cfg.seed)?,
    };
    let mut lambda = rayleigh_quotient(&u, g, 2.0)?;
    let mut history = vec![lambda];
    let mut last_rel = f64::INFINITY;
    let mut iters = 0;
    let mut residual;
    loop {
        let lap = laplace_beltrami(&u, g)?;
        let r = lap.zip_map(&u, |l, v| l + lambda * v);
        residual = integrate(&r.map(|v| v * v), g)?.sqrt();
        if last_rel < cfg.tol_lambda && residual < cfg.residual_bound(lambda) {
            break;
        }
        if iters >= cfg.max_iter {
            break;
        }
        iters += 1;
        let mut rhs: Vec<f64> = u
            .values()
            .iter()
            .zip(g.sqrt_det().values())
            .map(|(a, w)| a * w)
            .collect();
        // keep the system consistent: drop the parts in the stiffness kernel
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        rhs.iter_mut().for_each(|v| *v -= mean);
        remove_alternating_modes(&grid, &mut rhs);
        let y = pcg(
            |x| stiffness(x, g),
            |r| pre.solve(r, 0.0),
            &rhs,
            CG_TOL,
            2000,
        );
        u = retract(&ScalarField::from_vec(grid, y), g, 2.0)?;
        let next = rayleigh_quotient(&u, g, 2.0)?;
        last_rel = ((lambda - next) / next).abs();
        lambda = next;
        history.push(lambda);
    }
    let converged = last_rel < cfg.tol_lambda && residual < cfg.residual_bound(lambda);
    Ok(EigenResult {
        lambda,
        u: canonicalize(u),
        residual,
        iters,
        converged,
        history,
    })
}

/// Ground state of `-4 Delta_g + R` (no orthogonality constraint).
///
/// Inverse iteration on the operator shifted by `min R - 1`, which makes it
/// positive definite.
pub fn perelman_eigen(g: &MetricField, cfg: &EigenConfig) -> Result<EigenResult> {
    cfg.validate()?;
    let grid = *g.grid();
    let r = scalar_curvature_2d(g);
    let shift = r.min() - 1.0;
    let sd = g.sqrt_det().values().to_vec();
    let potential: Vec<f64> = r.values().iter().zip(&sd).map(|(v, w)| w * (v - shift)).collect();
    let mean_potential = potential.iter().sum::<f64>() / grid.len() as f64;
    let pre = SpectralSolver::new(grid);
    let apply = |x: &[f64]| -> Vec<f64> {
        stiffness(x, g)
            .iter()
            .zip(x)
            .zip(&potential)
            .map(|((a, xv), q)| 4.0 * a + q * xv)
            .collect()
    };
    let rayleigh = |u: &[f64]| -> f64 {
        let a = stiffness(u, g);
        let num: f64 = (0..u.len())
            .map(|k| 4.0 * u[k] * a[k] + sd[k] * r.values()[k] * u[k] * u[k])
            .sum();
        let den: f64 = (0..u.len()).map(|k| sd[k] * u[k] * u[k]).sum();
        num / den
    };
    let m_normalize = |y: Vec<f64>| -> Vec<f64> {
        let m = weighted_sum(&y.iter().map(|v| v * v).collect::<Vec<_>>(), g) * grid.cell_area();
        let s = m.sqrt();
        y.into_iter().map(|v| v / s).collect()
    };

    let mut u = m_normalize(vec![1.0; grid.len()]);
    let mut lambda = rayleigh(&u);
    let mut history = vec![lambda];
    let mut last_rel = f64::INFINITY;
    let mut iters = 0;
    let mut residual;
    loop {
        let uf = ScalarField::from_vec(grid, u.clone());
        let lap = laplace_beltrami(&uf, g)?;
        let res: Vec<f64> = (0..u.len())
            .map(|k| -4.0 * lap.values()[k] + (r.values()[k] - lambda) * u[k])
            .collect();
        residual = integrate(&ScalarField::from_vec(grid, res.iter().map(|v| v * v).collect()), g)?.sqrt();
        if last_rel < cfg.tol_lambda && residual < cfg.residual_bound(lambda) {
            break;
        }
        if iters >= cfg.max_iter {
            break;
        }
        iters += 1;
        let rhs: Vec<f64> = u.iter().zip(&sd).map(|(a, w)| a * w).collect();
        let y = pcg(
            apply,
            |v| {
                pre.solve(v, mean_potential / 4.0)
                    .into_iter()
                    .map(|x| 0.25 * x)
                    .collect()
            },
            &rhs,
            CG_TOL,
            2000,
        );
        u = m_normalize(y);
        let next = rayleigh(&u);
        last_rel = (lambda - next).abs() / next.abs().max(1.0);
        lambda = next;
        history.push(lambda);
    }
    let converged = last_rel < cfg.tol_lambda && residual < cfg.residual_bound(lambda);
    let result = EigenResult {
        lambda,
        u: canonicalize(ScalarField::from_vec(grid, u)),
        residual,
        iters,
        converged,
        history,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

/// `lambda_1(-4 Delta_g + R)` with tight default tolerances.
pub fn perelman_lambda(g: &MetricField) -> Result<f64> {
    let cfg = EigenConfig {
        tol_lambda: 1e-13,
        tol_residual: 1e-8,
        max_iter: 500,
        ..EigenConfig::default()
    };
    Ok(perelman_eigen(g, &cfg)?.lambda)
}
