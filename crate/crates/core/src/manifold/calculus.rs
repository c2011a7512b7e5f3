use super::stencil::{d_x, d_y};
use super::{CovectorField, GridSpec, MetricField, ScalarField, VectorField};
use crate::error::Result;

/// Midpoint rule against the Riemannian measure: `sum f sqrt|g| h1 h2`.
///
/// Summation runs in storage order so results are bit-reproducible.
pub fn integrate(f: &ScalarField, g: &MetricField) -> Result<f64> {
    f.grid().ensure_same(g.grid())?;
    Ok(weighted_sum(f.values(), g) * f.grid().cell_area())
}

pub(crate) fn weighted_sum(v: &[f64], g: &MetricField) -> f64 {
    v.iter()
        .zip(g.sqrt_det().values())
        .map(|(a, w)| a * w)
        .sum()
}

/// Riemannian area of the chart.
pub fn volume(g: &MetricField) -> f64 {
    g.sqrt_det().values().iter().sum::<f64>() * g.grid().cell_area()
}

/// Coordinate differential `(d_1 f, d_2 f)`.
pub fn differential(f: &ScalarField) -> CovectorField {
    let grid = f.grid();
    CovectorField::from_vecs(*grid, d_x(grid, f.values()), d_y(grid, f.values()))
}

/// Raises a covector with `g^ij`.
pub fn raise(w: &CovectorField, g: &MetricField) -> Result<VectorField> {
    w.grid().ensure_same(g.grid())?;
    let inv = g.inv();
    let n = w.grid().len();
    let (mut x1, mut x2) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let [a, b, c] = inv.at(k);
        let (p, q) = (w.w1()[k], w.w2()[k]);
        x1[k] = a * p + b * q;
        x2[k] = b * p + c * q;
    }
    Ok(VectorField::from_vecs(*w.grid(), x1, x2))
}

/// `(grad f)^i = g^ij d_j f` with fourth-order stencils.
pub fn gradient(f: &ScalarField, g: &MetricField) -> Result<VectorField> {
    f.grid().ensure_same(g.grid())?;
    raise(&differential(f), g)
}

/// `div X = |g|^{-1/2} d_i(|g|^{1/2} X^i)`.
pub fn divergence(x: &VectorField, g: &MetricField) -> Result<ScalarField> {
    x.grid().ensure_same(g.grid())?;
    let grid: &GridSpec = x.grid();
    let sd = g.sqrt_det().values();
    let f1: Vec<f64> = x.x1().iter().zip(sd).map(|(a, s)| a * s).collect();
    let f2: Vec<f64> = x.x2().iter().zip(sd).map(|(a, s)| a * s).collect();
    let (a, b) = (d_x(grid, &f1), d_y(grid, &f2));
    let out = a
        .iter()
        .zip(&b)
        .zip(sd)
        .map(|((p, q), s)| (p + q) / s)
        .collect();
    Ok(ScalarField::from_vec(*grid, out))
}

/// `g(X, Y)` pointwise for contravariant `X, Y`.
pub fn inner(x: &VectorField, y: &VectorField, g: &MetricField) -> Result<ScalarField> {
    x.grid().ensure_same(g.grid())?;
    y.grid().ensure_same(g.grid())?;
    let t = g.tensor();
    let out = (0..g.grid().len())
        .map(|k| {
            let [a, b, c] = t.at(k);
            let (p1, p2, q1, q2) = (x.x1()[k], x.x2()[k], y.x1()[k], y.x2()[k]);
            a * p1 * q1 + b * (p1 * q2 + p2 * q1) + c * p2 * q2
        })
        .collect();
    Ok(ScalarField::from_vec(*g.grid(), out))
}

/// `|df|_g^2 = g^ij d_i f d_j f`.
pub fn grad_norm_sq(f: &ScalarField, g: &MetricField) -> Result<ScalarField> {
    f.grid().ensure_same(g.grid())?;
    Ok(covector_norm_sq(&differential(f), g))
}

pub(crate) fn covector_norm_sq(w: &CovectorField, g: &MetricField) -> ScalarField {
    let inv = g.inv();
    let out = (0..g.grid().len())
        .map(|k| {
            let [a, b, c] = inv.at(k);
            let (p, q) = (w.w1()[k], w.w2()[k]);
            a * p * p + 2.0 * b * p * q + c * q * q
        })
        .collect();
    ScalarField::from_vec(*g.grid(), out)
}

/// `(|grad f|^2 + eps^2)^{q/2}`; `eps = 0` gives `|grad f|^q`.
pub fn grad_norm_pow(f: &ScalarField, g: &MetricField, q: f64, eps: f64) -> Result<ScalarField> {
    let sq = grad_norm_sq(f, g)?;
    let e2 = eps * eps;
    Ok(sq.map(|s| pow_half(s + e2, q)))
}

/// `s^{q/2}` with the common exponents special-cased.
#[inline]
pub(crate) fn pow_half(s: f64, q: f64) -> f64 {
    if q == 2.0 {
        s
    } else if q == 0.0 {
        1.0
    } else if q == 1.0 {
        s.sqrt()
    } else if q == 4.0 {
        s * s
    } else if q == 3.0 {
        s * s.sqrt()
    } else {
        s.powf(0.5 * q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::SymTensorField;
    use rand::SeedableRng;
    use std::f64::consts::{PI, TAU};

    fn unit(n: usize) -> GridSpec {
        GridSpec::unit(n).unwrap()
    }

    #[test]
    fn integrate_flat_cases() {
        let g = MetricField::flat(unit(32));
        let one = ScalarField::constant(unit(32), 1.0);
        assert!((integrate(&one, &g).unwrap() - 1.0).abs() < 1e-14);
        let s = ScalarField::from_fn(unit(32), |x, _| (TAU * x).sin());
        assert!(integrate(&s, &g).unwrap().abs() < 1e-14);
    }

    #[test]
    fn integrate_rejects_grid_mismatch() {
        let g = MetricField::flat(unit(16));
        let f = ScalarField::constant(unit(32), 1.0);
        assert!(integrate(&f, &g).is_err());
    }

    #[test]
    fn integrate_conformal_against_dense_quadrature() {
        // Oracle: 1e6-point midpoint rule of exp(0.2 sin(2 pi x)) on [0, 1).
        let m = 1_000_000;
        let oracle: f64 = (0..m)
            .map(|k| (0.2 * (TAU * (k as f64 + 0.5) / m as f64).sin()).exp())
            .sum::<f64>()
            / m as f64;
        let grid = GridSpec::new(32, 16, 1.0, 1.0).unwrap();
        let u = ScalarField::from_fn(grid, |x, _| 0.1 * (TAU * x).sin());
        let g = MetricField::conformal(&u);
        let got = integrate(&ScalarField::constant(grid, 1.0), &g).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    }

    #[test]
    fn gradient_cases() {
        let grid = unit(64);
        let g = MetricField::flat(grid);
        let c = gradient(&ScalarField::constant(grid, 3.5), &g).unwrap();
        assert_eq!(c.max_abs(), 0.0);

        let f = ScalarField::from_fn(grid, |x, _| (TAU * x).sin());
        let x = gradient(&f, &g).unwrap();
        let exact = ScalarField::from_fn(grid, |x, _| TAU * (TAU * x).cos());
        let err = x
            .x1()
            .iter()
            .zip(exact.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-4);
        assert!(x.x2().iter().all(|v| v.abs() < 1e-12));

        let g4 = MetricField::new(SymTensorField::constant(grid, [4.0, 0.0, 1.0])).unwrap();
        let y = gradient(&f, &g4).unwrap();
        for (k, v) in y.x1().iter().enumerate() {
            let (i, _) = grid.ij(k);
            assert!((v - 0.5 * PI * (TAU * grid.x(i)).cos()).abs() < 1e-4);
        }
    }

    #[test]
    fn divergence_cases() {
        let grid = unit(64);
        let g = MetricField::flat(grid);
        let z = divergence(&VectorField::zeros(grid), &g).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let x = VectorField::from_fn(grid, |x, _| [(TAU * x).cos(), 0.0]);
        let d = divergence(&x, &g).unwrap();
        let exact = ScalarField::from_fn(grid, |x, _| -TAU * (TAU * x).sin());
        assert!(d.sub(&exact).max_abs() < 1e-4);
    }

    #[test]
    fn grad_norm_pow_cases() {
        let grid = unit(64);
        let g = MetricField::flat(grid);
        let f = ScalarField::from_fn(grid, |x, _| (TAU * x).sin());
        let sq = grad_norm_pow(&f, &g, 2.0, 0.0).unwrap();
        let exact = ScalarField::from_fn(grid, |x, _| (TAU * (TAU * x).cos()).powi(2));
        assert!(sq.sub(&exact).max_abs() < 1e-3);
        let c = grad_norm_pow(&ScalarField::constant(grid, 2.0), &g, 1.0, 0.0).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        let neg = grad_norm_pow(&f, &g, -1.0, 1e-8).unwrap();
        assert!(neg.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn discrete_adjointness() {
        let grid = GridSpec::new(32, 24, 1.0, 1.5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = ScalarField::random_bandlimited(grid, 2, 0.1, &mut rng);
        let g = MetricField::conformal(&u);
        let f = ScalarField::random_bandlimited(grid, 3, 1.0, &mut rng);
        let x = VectorField::new(
            grid,
            ScalarField::random_bandlimited(grid, 3, 1.0, &mut rng).into_values(),
            ScalarField::random_bandlimited(grid, 3, 1.0, &mut rng).into_values(),
        )
        .unwrap();
        let lhs = integrate(&inner(&x, &gradient(&f, &g).unwrap(), &g).unwrap(), &g).unwrap();
        let rhs = integrate(&f.mul(&divergence(&x, &g).unwrap()), &g).unwrap();
        let scale = x.max_abs() * f.max_abs();
        assert!((lhs + rhs).abs() <= 1e-10 * scale, "{lhs} {rhs}");
    }
}
