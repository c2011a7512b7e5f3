use super::constraint::{retract, signed_pow};
use super::precond::SpectralSolver;
use super::{canonicalize, random_start, EigenConfig, EigenResult};
use crate::error::{Error, Result};
use crate::manifold::{integrate, MetricField, ScalarField};
use crate::operators::{p_laplacian, rayleigh_quotient};

/// Smallest step tried before declaring the descent stalled.
const MIN_STEP: f64 = 1e-14;

/// Relative band in which two quotient values are treated as equal.
const NOISE: f64 = 2e-14;

struct Eval {
    lambda: f64,
    // Delta_p u + lambda |u|^{p-2} u
    residual_field: Vec<f64>,
    residual: f64,
}

fn evaluate(u: &ScalarField, g: &MetricField, p: f64, eps: f64) -> Result<Eval> {
    let lambda = rayleigh_quotient(u, g, p)?;
    let lap = p_laplacian(u, g, p, eps)?;
    let r = lap.zip_map(u, |l, v| l + lambda * signed_pow(v, p));
    let residual = integrate(&r.map(|v| v * v), g)?.sqrt();
    Ok(Eval {
        lambda,
        residual_field: r.into_values(),
        residual,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected, preconditioned descent on the Rayleigh quotient.
///
/// The L2(dmu) gradient `-p (Delta_p u + lambda |u|^{p-2} u)` is mapped through
/// the flat inverse `(-Delta_0)^{-1}`; for `p = 2` on a conformal metric a unit
/// step is exactly one inverse-iteration sweep. Successive directions are
/// combined with a Polak-Ribiere (PR+) coefficient and the scheme falls back
/// to the plain preconditioned gradient whenever the combination is not a
/// descent direction or its line search fails. Trial points are pulled back by
/// `normalize_p(project_constraint(.))`; a step is accepted when the quotient
/// decreases, or, once the quotient has flattened to rounding level, when it
/// does not increase and the residual drops.
pub(super) fn solve(
    g: &MetricField,
    p: f64,
    cfg: &EigenConfig,
    warm: Option<&ScalarField>,
) -> Result<EigenResult> {
    let eps = cfg.eps_for(p);
    let grid = *g.grid();
    let pre = SpectralSolver::new(grid);
    let retract = |f: &ScalarField| retract(f, g, p);

    let mut u = match warm {
        Some(w) => retract(w)?,
        None => random_start(g, p, cfg.seed)?,
    };
    let mut cur = evaluate(&u, g, p, eps)?;
    let mut history = vec![cur.lambda];
    let mut eta = cfg.step0;
    let mut last_rel = f64::INFINITY;
    let mut stalled = false;
    let mut iters = 0;
    // previous (weighted gradient, preconditioned gradient, direction)
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    loop {
        if (last_rel < cfg.tol_lambda || stalled) && cur.residual < cfg.residual_bound(cur.lambda) {
            break;
        }
        if stalled || iters >= cfg.max_iter {
            break;
        }
        iters += 1;

        let w: Vec<f64> = cur
            .residual_field
            .iter()
            .zip(g.sqrt_det().values())
            .map(|(a, s)| a * s)
            .collect();
        let z = pre.solve(&w, 0.0);
        let wz = dot(&w, &z);
        let mut dir = z.clone();
        let mut momentum = false;
        if let Some((w0, z0, d0)) = &prev {
            let den = dot(w0, z0);
            if den > 0.0 {
                let beta = ((wz - dot(&z, w0)) / den).max(0.0);
                if beta > 0.0 {
                    let cand: Vec<f64> = z.iter().zip(d0).map(|(a, b)| a + beta * b).collect();
                    if dot(&cand, &w) > 0.0 {
                        dir = cand;
                        momentum = true;
                    }
                }
            }
        }

        let eta_start = eta;
        let mut accepted = false;
        loop {
            let dfield = ScalarField::from_vec(grid, dir.clone());
            let trial = u.zip_map(&dfield, |a, b| a + eta * b);
            let ok = match retract(&trial) {
                Ok(cand) => {
                    let next = evaluate(&cand, g, p, eps)?;
                    let band = NOISE * cur.lambda.abs().max(f64::MIN_POSITIVE);
                    let better = next.lambda < cur.lambda - band
                        || (next.lambda <= cur.lambda + band && next.residual < cur.residual);
                    if better {
                        last_rel = ((cur.lambda - next.lambda) / next.lambda.abs().max(f64::MIN_POSITIVE)).abs();
                        u = cand;
                        cur = next;
                        history.push(cur.lambda);
                        true
                    } else {
                        false
                    }
                }
                // A step that collapses u to a constant is simply too long.
                Err(Error::DegenerateInput(_)) => false,
                Err(e) => return Err(e),
            };
            if ok {
                eta *= 1.5;
                accepted = true;
                break;
            }
            eta *= 0.5;
            if eta < MIN_STEP * cfg.step0 {
                eta = cfg.step0;
                break;
            }
        }
        if accepted {
            prev = Some((w, z, dir));
        } else if momentum || eta_start < cfg.step0 {
            // retry from the plain gradient with a full-length first trial
            prev = None;
            eta = cfg.step0;
        } else {
            stalled = true;
        }
    }

    let converged = cur.residual < cfg.residual_bound(cur.lambda) && (last_rel < cfg.tol_lambda || stalled);
    Ok(EigenResult {
        lambda: cur.lambda,
        u: canonicalize(u),
        residual: cur.residual,
        iters,
        converged,
        history,
    })
}
