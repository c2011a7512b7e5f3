//! Independent checks of the eigenvalue evolution identity, the monotone
//! quantities and the lower bounds along computed flows.

mod lemmas;
mod report;

pub use lemmas::{lemma_suite, LemmaResidual};
pub use report::{CheckRow, Outcome, Report};

use crate::eigen::{abs_pow, constraint_value, p_mass, EigenResult};
use crate::error::{Error, Result};
use crate::flow::{psi_lower_bound, FlowTrace};
use crate::manifold::{gradient, grad_norm_pow, integrate, MetricField, ScalarField, SymTensorField};
use crate::operators::{tensor_apply, trace_tensor};

/// Hypotheses of the monotonicity statements, as measured at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisFlags {
    /// `h - alpha H g >= 0`.
    pub pinching_ok: bool,
    /// `H >= 0`.
    pub trace_nonneg: bool,
    /// `beta - Delta H >= 0`.
    pub beta_ok: bool,
    pub alpha: f64,
    pub p: f64,
}

impl HypothesisFlags {
    pub fn all(&self) -> bool {
        self.pinching_ok && self.trace_nonneg && self.beta_ok
    }

    /// Names of the failed hypotheses.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.pinching_ok {
            out.push("pinching");
        }
        if !self.trace_nonneg {
            out.push("trace_nonneg");
        }
        if !self.beta_ok {
            out.push("beta");
        }
        out
    }
}

/// Warnings for `alpha` outside the ranges used by the monotonicity
/// statements; the computation proceeds regardless.
pub fn alpha_range_warnings(alpha: f64, p: f64, n: usize) -> Vec<String> {
    let inv_n = 1.0 / n as f64;
    let mut out = Vec::new();
    if !(alpha >= 1.0 / p && alpha < inv_n) {
        out.push(format!(
            "alpha = {alpha} is outside [1/p, 1/n) = [{}, {inv_n}) required for the p-Laplacian monotonicity",
            1.0 / p
        ));
    }
    if !(0.0..=inv_n).contains(&alpha) {
        out.push(format!("alpha = {alpha} is outside [0, 1/n] required for the pinching lower bound"));
    }
    if p == 2.0 && alpha < 0.5 {
        out.push(format!("alpha = {alpha} < 1/2, below the range of the p = 2 monotone quantity"));
    }
    out
}

fn ensure_normalized(eig: &EigenResult, g: &MetricField, p: f64) -> Result<()> {
    let mass = p_mass(&eig.u, g, p)?;
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(format!("int |u|^p = {mass}")));
    }
    let c = constraint_value(&eig.u, g, p)?;
    if c.abs() > 1e-8 {
        return Err(Error::NotNormalized(format!("int |u|^(p-2) u = {c:e}")));
    }
    Ok(())
}

struct Integrals {
    // int H |u|^p, int H |grad u|^p, int |grad u|^{p-2} h(grad u, grad u)
    h_u: f64,
    h_grad: f64,
    h_dir: f64,
}

fn integrals(g: &MetricField, h: &SymTensorField, u: &ScalarField, p: f64) -> Result<Integrals> {
    let trace = trace_tensor(h, g)?;
    let grad = gradient(u, g)?;
    let eps = if p < 2.0 { 1e-8 } else { 0.0 };
    let gp = grad_norm_pow(u, g, p, eps)?;
    let gp2 = grad_norm_pow(u, g, p - 2.0, eps)?;
    let dir = tensor_apply(h, &grad, &grad)?;
    Ok(Integrals {
        h_u: integrate(&trace.zip_map(u, |a, v| a * abs_pow(v, p)), g)?,
        h_grad: integrate(&trace.mul(&gp), g)?,
        h_dir: integrate(&gp2.mul(&dir), g)?,
    })
}

/// `lambda int H |u|^p - int H |grad u|^p + p int |grad u|^{p-2} h(grad u, grad u)`,
/// the time derivative of `lambda_{p,1}` along `d/dt g = -2h`.
pub fn evolution_rhs_p(g: &MetricField, h: &SymTensorField, eig: &EigenResult, p: f64) -> Result<f64> {
    crate::operators::check_p(p)?;
    ensure_normalized(eig, g, p)?;
    let i = integrals(g, h, &eig.u, p)?;
    Ok(eig.lambda * i.h_u - i.h_grad + p * i.h_dir)
}

/// The `p = 2` evolution `(lambda int H phi^2 - int H |grad phi|^2
/// + 2 int h(grad phi, grad phi)) / int phi^2`, written without assuming the
/// normalization.
pub fn evolution_rhs_laplace(g: &MetricField, h: &SymTensorField, eig: &EigenResult) -> Result<f64> {
    ensure_normalized(eig, g, 2.0)?;
    let phi = &eig.u;
    let trace = trace_tensor(h, g)?;
    let grad = gradient(phi, g)?;
    let dir = tensor_apply(h, &grad, &grad)?;
    let norm_sq = crate::manifold::grad_norm_sq(phi, g)?;
    let a = integrate(&trace.zip_map(phi, |t, v| t * v * v), g)?;
    let b = integrate(&trace.mul(&norm_sq), g)?;
    let c = integrate(&dir, g)?;
    let mass = integrate(&phi.map(|v| v * v), g)?;
    Ok((eig.lambda * a - b + 2.0 * c) / mass)
}

/// `Theta = lambda int H |u|^p + (alpha p - 1) int H |grad u|^p`.
pub fn theta(g: &MetricField, h: &SymTensorField, eig: &EigenResult, p: f64, alpha: f64) -> Result<f64> {
    ensure_normalized(eig, g, p)?;
    let i = integrals(g, h, &eig.u, p)?;
    Ok(eig.lambda * i.h_u + (alpha * p - 1.0) * i.h_grad)
}

/// Central difference `(lambda_{i+1} - lambda_{i-1}) / (t_{i+1} - t_{i-1})`.
pub fn fd_lambda_derivative(trace: &FlowTrace, index: usize) -> Result<f64> {
    let s = trace.samples();
    if index == 0 || index + 1 >= s.len() {
        return Err(Error::IndexOutOfRange { index, len: s.len() });
    }
    let (a, b) = (&s[index - 1], &s[index + 1]);
    Ok((b.lambda - a.lambda) / (b.t - a.t))
}

/// One-sided second-order difference at the first or last sample (uniform
/// spacing assumed).
pub fn fd_lambda_derivative_endpoint(trace: &FlowTrace, last: bool) -> Result<f64> {
    let s = trace.samples();
    if s.len() < 3 {
        return Err(Error::IndexOutOfRange { index: 2, len: s.len() });
    }
    let (a, b, c) = if last {
        let n = s.len();
        (&s[n - 1], &s[n - 2], &s[n - 3])
    } else {
        (&s[0], &s[1], &s[2])
    };
    let h = b.t - a.t;
    Ok((-3.0 * a.lambda + 4.0 * b.lambda - c.lambda) / (2.0 * h))
}

/// `lambda exp(-2 alpha int_0^t psi)`.
pub fn monotone_quantity_p2(lambda: f64, alpha: f64, psi_integral: f64) -> f64 {
    lambda * (-2.0 * alpha * psi_integral).exp()
}

/// `lambda (1/psi0 - 2t/n)^{alpha n p / 2}`.
pub fn monotone_quantity_p(lambda: f64, psi0: f64, n: usize, alpha: f64, p: f64, t: f64) -> Result<f64> {
    if !(psi0 > 0.0) {
        return Err(Error::InvalidArgument(format!("psi0 must be > 0, got {psi0}")));
    }
    let nf = n as f64;
    let base = 1.0 / psi0 - 2.0 * t / nf;
    if base <= 0.0 {
        return Err(Error::PoleReached {
            t,
            pole: nf / (2.0 * psi0),
        });
    }
    Ok(lambda * base.powf(alpha * nf * p / 2.0))
}

fn first_unmet(trace: &FlowTrace) -> Option<String> {
    trace.samples().iter().find(|s| !s.flags.all()).map(|s| {
        format!("{} fails at t = {}", s.flags.failures().join(", "), s.t)
    })
}

/// Both lower bounds between consecutive samples: the additive
/// `lambda(t2) >= lambda(t1) + int Theta` and the multiplicative
/// `lambda(t2) >= lambda(t1) exp(alpha p int psi)`.
///
/// Requires the measured hypotheses to hold at every sample.
pub fn corollary_bound_check(trace: &FlowTrace, alpha: f64, p: f64) -> Result<Report> {
    if let Some(msg) = first_unmet(trace) {
        return Err(Error::HypothesisNotMet(msg));
    }
    let mut report = Report::default();
    for w in trace.samples().windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        let tol = 1e-8 * b.lambda.abs().max(1.0);
        let additive = a.lambda + 0.5 * dt * (a.theta + b.theta);
        report.push(CheckRow::lower_bound("corollary_theta", b.t, b.lambda, additive, tol));
        let psi_int = b.psi_integral - a.psi_integral;
        let expo = a.lambda * (alpha * p * psi_int).exp();
        report.push(CheckRow::lower_bound("corollary_exp", b.t, b.lambda, expo, tol));
    }
    Ok(report)
}

/// Options for [`verify_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub checks: Vec<String>,
    pub alpha: f64,
    pub p: f64,
}

/// Names accepted in [`VerifyOptions::checks`].
pub const CHECK_NAMES: [&str; 7] = [
    "identity",
    "monotone_p",
    "monotone_p2",
    "corollary",
    "psi_bound",
    "metric_bounds",
    "cold_restart",
];

/// Runs the requested trace-level checks.
pub fn verify_trace(trace: &FlowTrace, opts: &VerifyOptions) -> Result<Report> {
    let mut report = Report::default();
    let s = trace.samples();
    for name in &opts.checks {
        match name.as_str() {
            "identity" => {
                for i in 1..s.len().saturating_sub(1) {
                    let fd = fd_lambda_derivative(trace, i)?;
                    let rhs = s[i].rhs_p;
                    let tol = (1e-2 * rhs.abs()).max(1e-3 * s[i].lambda.abs());
                    report.push(CheckRow::equality("identity", s[i].t, fd, rhs, tol));
                }
            }
            "monotone_p" | "monotone_p2" => {
                let is_p = name == "monotone_p";
                if !is_p && opts.p != 2.0 {
                    report.push(CheckRow::skipped(name, 0.0, "p != 2"));
                    continue;
                }
                for w in s.windows(2) {
                    let (a, b) = (&w[0], &w[1]);
                    if !(a.flags.all() && b.flags.all()) {
                        let why = b.flags.failures().into_iter().chain(a.flags.failures()).next().unwrap_or("");
                        report.push(CheckRow::skipped(name, b.t, why));
                        continue;
                    }
                    let (qa, qb) = if is_p { (a.q_p, b.q_p) } else { (a.q_p2, b.q_p2) };
                    if !(qa.is_finite() && qb.is_finite()) {
                        report.push(CheckRow::skipped(name, b.t, "quantity undefined"));
                        continue;
                    }
                    let tol = 1e-8 * qa.abs().max(1.0);
                    report.push(CheckRow::lower_bound(name, b.t, qb, qa, tol));
                }
            }
            "corollary" => match corollary_bound_check(trace, opts.alpha, opts.p) {
                Ok(r) => report.extend(r),
                Err(Error::HypothesisNotMet(msg)) => report.push(CheckRow::skipped("corollary", 0.0, &msg)),
                Err(e) => return Err(e),
            },
            "psi_bound" => {
                let h0 = trace.h_min0();
                let tol = 1e-3 * h0.abs().max(1.0);
                for smp in s {
                    if smp.flags.beta_ok {
                        match psi_lower_bound(h0, 2, smp.t) {
                            Ok(psi) => report.push(CheckRow::lower_bound("psi_bound", smp.t, smp.h_min, psi, tol)),
                            Err(_) => report.push(CheckRow::skipped("psi_bound", smp.t, "past comparison pole")),
                        }
                    } else {
                        report.push(CheckRow::skipped("psi_bound", smp.t, "beta"));
                    }
                }
            }
            "metric_bounds" => {
                let (k1, k2) = trace.h_bounds();
                let row = match crate::flow::check_metric_bounds(trace, k1, k2) {
                    Ok(r) => {
                        let mut row = CheckRow::lower_bound("metric_bounds", trace.t_end(), r.min_slack, 0.0, 1e-12);
                        row.abs_err = r.lower_gap;
                        row
                    }
                    Err(Error::BoundViolated { t, .. }) => {
                        let mut row = CheckRow::lower_bound("metric_bounds", t, -1.0, 0.0, 0.0);
                        row.outcome = Outcome::Fail;
                        row
                    }
                    Err(e) => return Err(e),
                };
                report.push(row);
            }
            "cold_restart" => {
                for smp in s {
                    if let Some(cold) = smp.lambda_cold {
                        let tol = opts_cold_tol(smp.lambda);
                        let mut row = CheckRow::equality("cold_restart", smp.t, smp.lambda, cold, tol);
                        // branch divergence is reported, not judged
                        if row.outcome == Outcome::Fail {
                            row.outcome = Outcome::Skipped;
                        }
                        report.push(row);
                    }
                }
            }
            other => return Err(Error::validation("checks", format!("unknown check `{other}`"))),
        }
    }
    Ok(report)
}

fn opts_cold_tol(lambda: f64) -> f64 {
    1e-6 * lambda.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{normalize_p, project_constraint};
    use crate::manifold::GridSpec;
    use crate::operators::rayleigh_quotient;
    use std::f64::consts::TAU;

    fn flat_pair(n: usize, p: f64) -> (MetricField, EigenResult) {
        let grid = GridSpec::unit(n).unwrap();
        let g = MetricField::flat(grid);
        let f = ScalarField::from_fn(grid, |x, _| (TAU * x).sin());
        let u = normalize_p(&project_constraint(&f, &g, p).unwrap(), &g, p).unwrap();
        let lambda = rayleigh_quotient(&u, &g, p).unwrap();
        let eig = EigenResult {
            lambda,
            u,
            residual: 0.0,
            iters: 0,
            converged: true,
            history: vec![lambda],
        };
        (g, eig)
    }

    #[test]
    fn conformal_h_collapses_to_pc_lambda() {
        let (g, eig) = flat_pair(64, 3.0);
        let h = g.tensor().scale(0.1);
        let rhs = evolution_rhs_p(&g, &h, &eig, 3.0).unwrap();
        assert!((rhs - 0.3 * eig.lambda).abs() < 1e-12 * eig.lambda, "{rhs}");
        let zero = SymTensorField::zeros(*g.grid());
        assert_eq!(evolution_rhs_p(&g, &zero, &eig, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn laplace_form_matches_general_form() {
        let (g, eig) = flat_pair(32, 2.0);
        let h = g.tensor().scale(0.25);
        let a = evolution_rhs_laplace(&g, &h, &eig).unwrap();
        let b = evolution_rhs_p(&g, &h, &eig, 2.0).unwrap();
        assert!((a - 0.5 * eig.lambda).abs() < 1e-10);
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let (g, mut eig) = flat_pair(16, 2.0);
        eig.u = eig.u.scale(2.0);
        let h = g.tensor().clone();
        assert!(matches!(evolution_rhs_p(&g, &h, &eig, 2.0), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn monotone_quantity_cases() {
        assert_eq!(monotone_quantity_p2(5.0, 0.5, 0.0), 5.0);
        // psi = C, lambda = lambda0 e^{2 alpha C t}: constant
        let (alpha, c, l0): (f64, f64, f64) = (0.5, 0.7, 3.0);
        for t in [0.1, 0.5, 1.3] {
            let l = l0 * (2.0 * alpha * c * t).exp();
            assert!((monotone_quantity_p2(l, alpha, c * t) - l0).abs() < 1e-14);
        }
        assert!((monotone_quantity_p(2.0, 4.0, 2, 0.4, 3.0, 0.0).unwrap() - 2.0 * 4f64.powf(-1.2)).abs() < 1e-15);
        assert!(matches!(monotone_quantity_p(1.0, 1.0, 2, 0.4, 3.0, 1.0), Err(Error::PoleReached { .. })));
        // calibrated closed form with alpha = 1/n: constant
        for t in [0.0, 0.2, 0.7] {
            let l = 10.0 * (1.0f64 - t).powf(-1.5);
            let q = monotone_quantity_p(l, 1.0, 2, 0.5, 3.0, t).unwrap();
            assert!((q - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_warnings() {
        assert!(alpha_range_warnings(0.4, 3.0, 2).is_empty());
        assert!(!alpha_range_warnings(0.6, 3.0, 2).is_empty());
        assert!(!alpha_range_warnings(0.4, 2.0, 2).is_empty());
    }
}
