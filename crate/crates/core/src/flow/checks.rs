use super::{FlowSpec, FlowState, FlowTrace};
use crate::error::{Error, Point, Result};
use crate::manifold::{generalized_eigenvalues, MetricField, ScalarField, SymTensorField};
use crate::operators::{laplace_beltrami, trace_tensor};

/// Minimum over the grid of the smaller eigenvalue of `g^{-1}(h - alpha H g)`.
pub fn check_pinching(h: &SymTensorField, g: &MetricField, alpha: f64) -> Result<f64> {
    let trace = trace_tensor(h, g)?;
    let mut worst = f64::INFINITY;
    for k in 0..g.grid().len() {
        let gk = g.tensor().at(k);
        let hk = h.at(k);
        let s = alpha * trace.values()[k];
        let a = [hk[0] - s * gk[0], hk[1] - s * gk[1], hk[2] - s * gk[2]];
        worst = worst.min(generalized_eigenvalues(a, gk).0);
    }
    Ok(worst)
}

/// Comparison solution `H_min(0) / (1 - (2/n) H_min(0) t)`.
pub fn psi_lower_bound(h_min0: f64, n: usize, t: f64) -> Result<f64> {
    let k = 2.0 / n as f64 * h_min0;
    let den = 1.0 - k * t;
    if den <= 0.0 {
        return Err(Error::PoleReached { t, pole: 1.0 / k });
    }
    Ok(h_min0 / den)
}

/// `beta - Delta_g H` with `beta = g^ij d/dt h_ij` measured by a central
/// difference: the state is pushed to `t +- dt_probe` along its own velocity
/// (`g -+ 2 h dt_probe`, or `u +- dt_probe du/dt` for conformal states) and
/// the flow tensor re-evaluated there.
pub fn check_beta_condition(spec: &FlowSpec, state: &FlowState, dt_probe: f64) -> Result<ScalarField> {
    if !(dt_probe > 0.0) {
        return Err(Error::InvalidArgument(format!("probe step must be > 0, got {dt_probe}")));
    }
    let t = state.t;
    let (h_plus, h_minus) = match &state.conformal_u {
        Some(u) if super::conformal_rate(spec, t, u)?.is_some() => {
            let rate = super::conformal_rate(spec, t, u)?.expect("checked");
            let up = u.zip_map(&rate, |a, b| a + dt_probe * b);
            let um = u.zip_map(&rate, |a, b| a - dt_probe * b);
            (
                spec.h_at(t + dt_probe, &MetricField::conformal(&up), Some(&up))?,
                spec.h_at(t - dt_probe, &MetricField::conformal(&um), Some(&um))?,
            )
        }
        _ => {
            let h = &state.h_cache;
            let gp = MetricField::new(state.g.tensor().axpy(-2.0 * dt_probe, h))?;
            let gm = MetricField::new(state.g.tensor().axpy(2.0 * dt_probe, h))?;
            (spec.h_at(t + dt_probe, &gp, None)?, spec.h_at(t - dt_probe, &gm, None)?)
        }
    };
    let dh = h_plus.axpy(-1.0, &h_minus).scale(0.5 / dt_probe);
    let beta = trace_tensor(&dh, &state.g)?;
    let lap_h = laplace_beltrami(&trace_tensor(&state.h_cache, &state.g)?, &state.g)?;
    Ok(beta.sub(&lap_h))
}

/// Outcome of [`check_metric_bounds`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBoundsReport {
    pub k1: f64,
    pub k2: f64,
    /// Largest `|ratio_min - e^{-2 K2 t}|`: how tightly the lower envelope is met.
    pub lower_gap: f64,
    /// Smallest slack against either envelope (negative means violated).
    pub min_slack: f64,
    /// Whether the literal exponents `e^{-K1 T}`, `e^{K2 T}` with the final
    /// time `T` also bound every sample.
    pub literal_holds: bool,
}

/// Checks `e^{-2 K2 t} g(0) <= g(t) <= e^{2 K1 t} g(0)` at every sample, for
/// `-K1 g <= h <= K2 g`.
///
/// The envelope follows from `|d/dt log g(X, X)| = 2 |h(X, X)| / g(X, X)`;
/// a lower bound on `h` caps growth and an upper bound caps decay. The
/// variant with exponents `K1 T`, `K2 T` is evaluated and reported alongside.
pub fn check_metric_bounds(trace: &FlowTrace, k1: f64, k2: f64) -> Result<MetricBoundsReport> {
    if !(k1 >= 0.0 && k2 >= 0.0) {
        return Err(Error::InvalidArgument("bounds K1, K2 must be >= 0".into()));
    }
    let t_end = trace.samples().last().map_or(0.0, |s| s.t);
    let rel = 1e-12;
    let mut lower_gap: f64 = 0.0;
    let mut min_slack = f64::INFINITY;
    let mut literal_holds = true;
    for s in trace.samples() {
        let lower = (-2.0 * k2 * s.t).exp();
        let upper = (2.0 * k1 * s.t).exp();
        lower_gap = lower_gap.max((s.g_ratio_min - lower).abs());
        let slack = (s.g_ratio_min - lower).min(upper - s.g_ratio_max);
        min_slack = min_slack.min(slack);
        if s.g_ratio_min < lower * (1.0 - rel) {
            return Err(Error::BoundViolated {
                t: s.t,
                point: s.g_ratio_min_at,
            });
        }
        if s.g_ratio_max > upper * (1.0 + rel) {
            return Err(Error::BoundViolated {
                t: s.t,
                point: s.g_ratio_max_at,
            });
        }
        if s.g_ratio_min < (-k1 * t_end).exp() * (1.0 - rel)
            || s.g_ratio_max > (k2 * t_end).exp() * (1.0 + rel)
        {
            literal_holds = false;
        }
    }
    Ok(MetricBoundsReport {
        k1,
        k2,
        lower_gap,
        min_slack,
        literal_holds,
    })
}

/// Extreme generalized eigenvalues of `(a, g)` over the grid with the points
/// where they occur.
pub(crate) fn generalized_range(a: &SymTensorField, g: &SymTensorField) -> (f64, Point, f64, Point) {
    let grid = g.grid();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_at, mut hi_at) = (Point { i: 0, j: 0 }, Point { i: 0, j: 0 });
    for k in 0..grid.len() {
        let (a_min, a_max) = generalized_eigenvalues(a.at(k), g.at(k));
        let (i, j) = grid.ij(k);
        if a_min < lo {
            lo = a_min;
            lo_at = Point { i, j };
        }
        if a_max > hi {
            hi = a_max;
            hi_at = Point { i, j };
        }
    }
    (lo, lo_at, hi, hi_at)
}
