use super::precond::alternating_modes;
use crate::error::{Error, Result};
use crate::manifold::{integrate, weighted_sum, MetricField, ScalarField};

/// `|x|^{p-2} x`, continuous at 0 for every `p >= 1` (sign at `p = 1`).
#[inline]
pub fn signed_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x
    } else if p == 3.0 {
        x * x.abs()
    } else if p == 4.0 {
        x * x * x
    } else if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p - 1.0) * x.signum()
    }
}

#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 3.0 {
        x * x * x.abs()
    } else if p == 4.0 {
        let s = x * x;
        s * s
    } else {
        x.abs().powf(p)
    }
}

/// `int |f|^{p-2} f dmu`.
pub fn constraint_value(f: &ScalarField, g: &MetricField, p: f64) -> Result<f64> {
    integrate(&f.map(|v| signed_pow(v, p)), g)
}

/// `int |f|^p dmu`.
pub fn p_mass(f: &ScalarField, g: &MetricField, p: f64) -> Result<f64> {
    integrate(&f.map(|v| abs_pow(v, p)), g)
}

/// Shifts `f` by the unique constant `s` with `int |f - s|^{p-2}(f - s) dmu = 0`.
///
/// `s -> int |f-s|^{p-2}(f-s)` is strictly decreasing, so the root is found by
/// bisection on `[min f, max f]`; `p = 2` is plain mean removal.
pub fn project_constraint(f: &ScalarField, g: &MetricField, p: f64) -> Result<ScalarField> {
    crate::operators::check_p(p)?;
    f.grid().ensure_same(g.grid())?;
    let (lo, hi) = (f.min(), f.max());
    let range = hi - lo;
    if !(range > 1e-300 && range > 1e-14 * hi.abs().max(lo.abs())) {
        return Err(Error::DegenerateInput(
            "cannot project a constant function onto the constraint set".into(),
        ));
    }
    if p == 2.0 {
        let s = weighted_sum(f.values(), g) / weighted_sum(&vec![1.0; f.grid().len()], g);
        return Ok(f.map(|v| v - s));
    }
    let vals = f.values();
    let weights = g.sqrt_det().values();
    let eval = |s: f64| -> f64 {
        vals.iter()
            .zip(weights)
            .map(|(&v, &w)| w * signed_pow(v - s, p))
            .sum()
    };
    let (mut a, mut b) = (lo, hi);
    let tol = 1e-12 * range;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if eval(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let s = 0.5 * (a + b);
    Ok(f.map(|v| v - s))
}

/// Shifts `f` within its coset modulo the stencil kernel (constants and the
/// alternating modes `a_k`) to the member of least `int |f|^p dmu`, which is
/// the one with `int |f|^{p-2} f a_k dmu = 0` for every `k`.
///
/// The energy does not see the kernel, so this picks the representative whose
/// Rayleigh quotient is the physical one. The objective is convex in the shift
/// coefficients; damped Newton converges in a handful of steps (one for
/// `p = 2`). Below `p = 2` the Hessian weight `|f|^{p-2}` is regularized.
pub(crate) fn balance_kernel(f: &ScalarField, g: &MetricField, p: f64) -> Result<ScalarField> {
    crate::operators::check_p(p)?;
    f.grid().ensure_same(g.grid())?;
    let grid = *f.grid();
    let mut modes = vec![vec![1.0; grid.len()]];
    modes.extend(alternating_modes(&grid));
    let m = modes.len();
    let w = g.sqrt_det().values();
    let mut v = f.values().to_vec();
    let phi = |v: &[f64]| -> f64 { v.iter().zip(w).map(|(x, wk)| wk * abs_pow(*x, p)).sum() };
    let amp = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if amp == 0.0 {
        return Ok(f.clone());
    }
    let delta2 = (1e-6 * amp).powi(2);
    let curvature = (p - 1.0).max(0.1);
    let mut current = phi(&v);
    for _ in 0..50 {
        let mut grad = vec![0.0; m];
        let mut hess = vec![vec![0.0; m]; m];
        let mut scale = 0.0;
        for k in 0..v.len() {
            let s = signed_pow(v[k], p);
            let hw = if p >= 2.0 {
                abs_pow(v[k], p - 2.0)
            } else {
                (v[k] * v[k] + delta2).powf(0.5 * (p - 2.0))
            };
            scale += w[k] * s.abs();
            for a in 0..m {
                grad[a] += w[k] * s * modes[a][k];
                for b in a..m {
                    hess[a][b] += w[k] * curvature * hw * modes[a][k] * modes[b][k];
                }
            }
        }
        if grad.iter().all(|x| x.abs() <= 1e-14 * scale) {
            break;
        }
        for a in 0..m {
            for b in 0..a {
                hess[a][b] = hess[b][a];
            }
        }
        let Some(step) = solve_spd(hess, grad) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..v.len())
                .map(|k| v[k] - t * (0..m).map(|a| step[a] * modes[a][k]).sum::<f64>())
                .collect();
            let value = phi(&trial);
            if value < current {
                v = trial;
                current = value;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(ScalarField::from_vec(grid, v))
}

/// Solves a small symmetric positive definite system by Cholesky.
fn solve_spd(mut a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let d = a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        a[j][j] = d.sqrt();
        for i in j + 1..n {
            a[i][j] = (a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>()) / a[j][j];
        }
    }
    let mut y = b;
    for i in 0..n {
        y[i] = (y[i] - (0..i).map(|k| a[i][k] * y[k]).sum::<f64>()) / a[i][i];
    }
    for i in (0..n).rev() {
        y[i] = (y[i] - (i + 1..n).map(|k| a[k][i] * y[k]).sum::<f64>()) / a[i][i];
    }
    Some(y)
}

/// `normalize_p(project_constraint(balance_kernel(f)))`: the pull-back onto
/// the constraint set used by every solver.
pub(crate) fn retract(f: &ScalarField, g: &MetricField, p: f64) -> Result<ScalarField> {
    normalize_p(&project_constraint(&balance_kernel(f, g, p)?, g, p)?, g, p)
}

/// `f / (int |f|^p dmu)^{1/p}`.
pub fn normalize_p(f: &ScalarField, g: &MetricField, p: f64) -> Result<ScalarField> {
    crate::operators::check_p(p)?;
    let mass = p_mass(f, g, p)?;
    if !(mass > 1e-300) {
        return Err(Error::ZeroDenominator(mass));
    }
    Ok(f.scale(mass.powf(-1.0 / p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::GridSpec;
    use std::f64::consts::TAU;

    fn setup(n: usize) -> (GridSpec, MetricField) {
        let grid = GridSpec::new(n, 8, 1.0, 1.0).unwrap();
        (grid, MetricField::flat(grid))
    }

    #[test]
    fn p2_is_mean_removal() {
        let (grid, g) = setup(32);
        let f = ScalarField::from_fn(grid, |x, _| 3.0 + (TAU * x).sin());
        let out = project_constraint(&f, &g, 2.0).unwrap();
        let exact = ScalarField::from_fn(grid, |x, _| (TAU * x).sin());
        assert!(out.sub(&exact).max_abs() < 1e-14);
    }

    #[test]
    fn odd_function_is_unchanged() {
        let (grid, g) = setup(32);
        let f = ScalarField::from_fn(grid, |x, _| (TAU * x).sin());
        for p in [1.5, 3.0, 4.5] {
            let out = project_constraint(&f, &g, p).unwrap();
            assert!(out.sub(&f).max_abs() < 1e-11, "p = {p}");
        }
    }

    #[test]
    fn p3_shift_matches_dense_oracle() {
        // Oracle: bisection on a 1e6-point midpoint quadrature of
        // int_0^1 |1 + sin(2 pi x) - s| (1 + sin(2 pi x) - s) dx.
        let m = 1_000_000;
        let xs: Vec<f64> = (0..m)
            .map(|k| 1.0 + (TAU * (k as f64 + 0.5) / m as f64).sin())
            .collect();
        let eval = |s: f64| xs.iter().map(|v| (v - s) * (v - s).abs()).sum::<f64>();
        let (mut a, mut b) = (0.0, 2.0);
        for _ in 0..60 {
            let c = 0.5 * (a + b);
            if eval(c) > 0.0 {
                a = c
            } else {
                b = c
            }
        }
        let s_oracle = 0.5 * (a + b);

        let (grid, g) = setup(256);
        let f = ScalarField::from_fn(grid, |x, _| 1.0 + (TAU * x).sin());
        let out = project_constraint(&f, &g, 3.0).unwrap();
        let s = f.get(0, 0) - out.get(0, 0);
        // |x| x is C^1, so the 256-point midpoint rule is accurate to ~1e-7.
        assert!((s - s_oracle).abs() < 1e-6, "{s} vs {s_oracle}");
        assert!(constraint_value(&out, &g, 3.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn constant_input_is_degenerate() {
        let (grid, g) = setup(16);
        assert!(matches!(
            project_constraint(&ScalarField::constant(grid, 2.0), &g, 3.0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn normalization_cases() {
        let (grid, g) = setup(64);
        let f = ScalarField::from_fn(grid, |x, _| (TAU * x).sin());
        let n2 = normalize_p(&f, &g, 2.0).unwrap();
        assert!(n2.sub(&f.scale(2f64.sqrt())).max_abs() < 1e-14);
        let again = normalize_p(&n2, &g, 2.0).unwrap();
        assert!(again.sub(&n2).max_abs() < 1e-15);

        let m = 1_000_000;
        let mass: f64 = (0..m)
            .map(|k| (TAU * (k as f64 + 0.5) / m as f64).sin().abs().powi(3))
            .sum::<f64>()
            / m as f64;
        let n3 = normalize_p(&f, &g, 3.0).unwrap();
        let scale = n3.max_abs() / f.max_abs();
        // |sin|^3 is only C^2 at its zeros: the 64-point rule is good to ~1e-6
        assert!((scale - mass.powf(-1.0 / 3.0)).abs() < 2e-6);
        assert!((p_mass(&n3, &g, 3.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            normalize_p(&ScalarField::zeros(grid), &g, 2.0),
            Err(Error::ZeroDenominator(_))
        ));
    }
}
