//! Metric-variation identities checked by a central-difference probe.
//!
//! `f` is frozen in time, so every identity reduces to its metric-variation
//! part. The probe metrics are `g -+ 2 h dt`; the left sides are central
//! differences of the discrete quantities and the right sides are evaluated at
//! the centre metric with the same stencils, so the residual is the
//! `O(dt^2)` probe error plus rounding.

use crate::error::{Error, Result};
use crate::manifold::{
    differential, grad_norm_pow, grad_norm_sq, gradient, pow_half, CovectorField, MetricField, ScalarField,
    SymTensorField,
};
use crate::operators::{
    check_p, christoffel, contract_covariant_derivative, covariant_derivative_sym, covariant_laplacian,
    covariant_p_laplacian, div_tensor, raise_tensor, tensor_apply, trace_of_covariant_derivative,
    trace_tensor,
};

/// Largest pointwise `|lhs - rhs|` for one identity, with the size of the
/// right side for scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaResidual {
    pub name: &'static str,
    pub max_abs: f64,
    pub scale: f64,
}

fn central(plus: &[f64], minus: &[f64], dt: f64) -> Vec<f64> {
    plus.iter().zip(minus).map(|(a, b)| (a - b) / (2.0 * dt)).collect()
}

fn residual(name: &'static str, lhs: &[Vec<f64>], rhs: &[Vec<f64>]) -> LemmaResidual {
    let mut max_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (l, r) in lhs.iter().zip(rhs) {
        for (a, b) in l.iter().zip(r) {
            max_abs = max_abs.max((a - b).abs());
            scale = scale.max(b.abs());
        }
    }
    LemmaResidual { name, max_abs, scale }
}

fn tensor_components(t: &SymTensorField) -> Vec<Vec<f64>> {
    vec![t.t11().to_vec(), t.t12().to_vec(), t.t22().to_vec()]
}

/// `<X, w>` for a raised `X` and a covector `w`.
fn pair(x: &crate::manifold::VectorField, w: &CovectorField) -> Vec<f64> {
    (0..w.grid().len())
        .map(|k| x.x1()[k] * w.w1()[k] + x.x2()[k] * w.w2()[k])
        .collect()
}

/// `g^kl a_k b_l`.
fn inner_covectors(a: &CovectorField, b: &CovectorField, g: &MetricField) -> Vec<f64> {
    (0..g.grid().len())
        .map(|k| {
            let [p, q, r] = g.inv().at(k);
            p * a.w1()[k] * b.w1()[k] + q * (a.w1()[k] * b.w2()[k] + a.w2()[k] * b.w1()[k]) + r * a.w2()[k] * b.w2()[k]
        })
        .collect()
}

/// Runs the eight identities: inverse metric, Christoffel symbols, `|grad f|^2`,
/// Laplacian, volume density, `|grad f|^p`, `Z = |grad f|^{p-2}` and the
/// p-Laplacian.
pub fn lemma_suite(
    g: &MetricField,
    h: &SymTensorField,
    f: &ScalarField,
    dt_probe: f64,
    p: f64,
) -> Result<Vec<LemmaResidual>> {
    check_p(p)?;
    g.grid().ensure_same(h.grid())?;
    g.grid().ensure_same(f.grid())?;
    if !(dt_probe > 0.0) {
        return Err(Error::InvalidArgument(format!("probe step must be > 0, got {dt_probe}")));
    }
    let dt = dt_probe;
    let n = g.grid().len();
    let gp = MetricField::new(g.tensor().axpy(-2.0 * dt, h))?;
    let gm = MetricField::new(g.tensor().axpy(2.0 * dt, h))?;
    let mut out = Vec::with_capacity(8);

    let h_up = raise_tensor(h, g)?;
    let gamma = christoffel(g);
    let df = differential(f);
    let grad = gradient(f, g)?;
    let h_ff = tensor_apply(h, &grad, &grad)?;
    let trace = trace_tensor(h, g)?;
    let div_h = div_tensor(h, g)?;
    let dtrace = trace_of_covariant_derivative(h, g)?;
    // 2 <div h, grad f> - <grad H, grad f>
    let div_terms: Vec<f64> = pair(&div_h, &df)
        .iter()
        .zip(inner_covectors(&dtrace, &df, g))
        .map(|(a, b)| 2.0 * a - b)
        .collect();

    // inverse metric
    {
        let (ip, im) = (tensor_components(gp.inv()), tensor_components(gm.inv()));
        let lhs: Vec<Vec<f64>> = ip.iter().zip(&im).map(|(a, b)| central(a, b, dt)).collect();
        let rhs = tensor_components(&h_up.scale(2.0));
        out.push(residual("inverse_metric", &lhs, &rhs));
    }

    // Christoffel symbols
    {
        let (cp, cm) = (christoffel(&gp), christoffel(&gm));
        let nab = covariant_derivative_sym(h, &gamma);
        let nh = |l: usize, a: usize, b: usize, q: usize| nab[l][a + b][q];
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for k in 0..2 {
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                lhs.push(central(cp.get(k, i, j), cm.get(k, i, j), dt));
                rhs.push(
                    (0..n)
                        .map(|q| {
                            let gi = g.inv().at(q);
                            (0..2)
                                .map(|l| {
                                    -gi[k + l] * (nh(i, j, l, q) + nh(j, i, l, q) - nh(l, i, j, q))
                                })
                                .sum()
                        })
                        .collect(),
                );
            }
        }
        out.push(residual("christoffel", &lhs, &rhs));
    }

    // |grad f|^2
    {
        let lhs = central(grad_norm_sq(f, &gp)?.values(), grad_norm_sq(f, &gm)?.values(), dt);
        let rhs = h_ff.scale(2.0).into_values();
        out.push(residual("grad_norm_sq", &[lhs], &[rhs]));
    }

    // Laplacian
    {
        let lhs = central(
            covariant_laplacian(f, &gp)?.values(),
            covariant_laplacian(f, &gm)?.values(),
            dt,
        );
        let hess_h = contract_covariant_derivative(&df, &h_up.scale(2.0), &gamma)?;
        let rhs: Vec<f64> = hess_h.values().iter().zip(&div_terms).map(|(a, b)| a + b).collect();
        out.push(residual("laplacian", &[lhs], &[rhs]));
    }

    // volume density
    {
        let lhs = central(gp.sqrt_det().values(), gm.sqrt_det().values(), dt);
        let rhs = trace.mul(g.sqrt_det()).scale(-1.0).into_values();
        out.push(residual("volume_density", &[lhs], &[rhs]));
    }

    // |grad f|^p and Z
    let norm_sq = grad_norm_sq(f, g)?;
    let z_t: Vec<f64> = norm_sq
        .values()
        .iter()
        .zip(h_ff.values())
        .map(|(&s, &hf)| {
            if p == 2.0 || s == 0.0 {
                0.0
            } else {
                (p - 2.0) * pow_half(s, p - 2.0) * hf / s
            }
        })
        .collect();
    {
        let lhs = central(
            grad_norm_pow(f, &gp, p, 0.0)?.values(),
            grad_norm_pow(f, &gm, p, 0.0)?.values(),
            dt,
        );
        let rhs: Vec<f64> = norm_sq
            .values()
            .iter()
            .zip(h_ff.values())
            .map(|(&s, &hf)| p * pow_half(s, p - 2.0) * hf)
            .collect();
        out.push(residual("grad_norm_p", &[lhs], &[rhs]));

        let lhs = central(
            grad_norm_pow(f, &gp, p - 2.0, 0.0)?.values(),
            grad_norm_pow(f, &gm, p - 2.0, 0.0)?.values(),
            dt,
        );
        out.push(residual("z_weight", &[lhs], &[z_t.clone()]));
    }

    // p-Laplacian
    {
        let lhs = central(
            covariant_p_laplacian(f, &gp, p, 0.0)?.values(),
            covariant_p_laplacian(f, &gm, p, 0.0)?.values(),
            dt,
        );
        let z = ScalarField::from_vec(*g.grid(), norm_sq.values().iter().map(|&s| pow_half(s, p - 2.0)).collect());
        let zt = ScalarField::from_vec(*g.grid(), z_t);
        let a = contract_covariant_derivative(&df.scale_by(&z), &h_up.scale(2.0), &gamma)?;
        let b = contract_covariant_derivative(&df.scale_by(&zt), g.inv(), &gamma)?;
        let rhs: Vec<f64> = (0..n)
            .map(|k| a.values()[k] + b.values()[k] + z.values()[k] * div_terms[k])
            .collect();
        out.push(residual("p_laplacian", &[lhs], &[rhs]));
    }

    Ok(out)
}
