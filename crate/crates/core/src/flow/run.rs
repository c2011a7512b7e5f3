use std::io::Write;

use super::checks::generalized_range;
use super::{check_beta_condition, check_pinching, psi_lower_bound, step, FlowSpec, FlowState};
use crate::eigen::{
    solve_first_eigen, solve_first_eigen_lenient, warm_start_transport, EigenConfig, EigenResult,
};
use crate::error::{Error, Point, Result};
use crate::harness::{
    evolution_rhs_p, monotone_quantity_p, monotone_quantity_p2, theta, HypothesisFlags,
};
use crate::manifold::snapshot::fmt_f64;
use crate::manifold::{volume, MetricField, ScalarField};
use crate::operators::trace_tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub t_end: f64,
    /// Sample-grid step. With `substep` set, each step is split into equal
    /// RK4 substeps that respect the stability bound.
    pub dt: f64,
    pub p: f64,
    pub alpha: f64,
    pub eigen: EigenConfig,
    /// Solve for the eigenpair every this many steps (and at the last step).
    pub eigen_every: usize,
    /// Keep a metric snapshot every this many steps; 0 disables.
    pub snapshot_every: usize,
    /// Also solve from a cold start every this many samples; 0 disables.
    pub cold_every: usize,
    pub substep: bool,
    pub beta_probe: f64,
    pub allow_unconverged: bool,
}

impl FlowParams {
    pub fn new(t_end: f64, dt: f64, p: f64, alpha: f64) -> Self {
        Self {
            t_end,
            dt,
            p,
            alpha,
            eigen: EigenConfig::default(),
            eigen_every: 1,
            snapshot_every: 0,
            cold_every: 0,
            substep: false,
            beta_probe: 1e-4,
            allow_unconverged: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::validation("T", "must be >= 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", "must be > 0"));
        }
        crate::operators::check_p(self.p).map_err(|_| Error::validation("p", "must be >= 1"))?;
        if !self.alpha.is_finite() {
            return Err(Error::validation("alpha", "must be finite"));
        }
        if self.eigen_every < 1 {
            return Err(Error::validation("eigen_every", "must be >= 1"));
        }
        if !(self.beta_probe > 0.0) {
            return Err(Error::validation("beta_probe", "must be > 0"));
        }
        self.eigen.validate()
    }
}

/// One row of the flow trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub t: f64,
    pub lambda: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub vol: f64,
    pub q_p2: f64,
    /// `NaN` where the quantity is undefined (`psi0 <= 0`).
    pub q_p: f64,
    pub pinch_min: f64,
    pub beta_min: f64,
    pub beta_abs_max: f64,
    pub eig_residual: f64,
    pub eig_iters: usize,
    pub converged: bool,
    pub rhs_p: f64,
    pub theta: f64,
    /// `NaN` past the comparison pole.
    pub psi: f64,
    /// Trapezoid integral of `psi` from 0 to `t`.
    pub psi_integral: f64,
    /// Extreme generalized eigenvalues of `(g(t), g(0))`.
    pub g_ratio_min: f64,
    pub g_ratio_min_at: Point,
    pub g_ratio_max: f64,
    pub g_ratio_max_at: Point,
    /// Extreme generalized eigenvalues of `(h, g)`.
    pub h_eig_min: f64,
    pub h_eig_max: f64,
    pub lambda_cold: Option<f64>,
    pub flags: HypothesisFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub metric: MetricField,
}

/// Append-only record of a flow run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowTrace {
    samples: Vec<Sample>,
    snapshots: Vec<Snapshot>,
    final_eigenfunction: Option<ScalarField>,
}

const TRACE_HEADER: &str = "t,lambda,H_min,H_max,vol,q_p2,q_p,pinch_min,beta_min,eig_residual,eig_iters";

impl FlowTrace {
    /// Appends a sample; times must increase strictly.
    pub fn push(&mut self, s: Sample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::InvalidArgument(format!(
                    "trace times must increase ({} after {})",
                    s.t, last.t
                )));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn final_eigenfunction(&self) -> Option<&ScalarField> {
        self.final_eigenfunction.as_ref()
    }

    pub fn h_min0(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.h_min)
    }

    pub fn t_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// `(K1, K2)` with `-K1 g <= h <= K2 g` over every sample.
    pub fn h_bounds(&self) -> (f64, f64) {
        let k1 = self.samples.iter().fold(0.0f64, |m, s| m.max(-s.h_eig_min));
        let k2 = self.samples.iter().fold(0.0f64, |m, s| m.max(s.h_eig_max));
        (k1, k2)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for s in &self.samples {
            let vals = [s.t, s.lambda, s.h_min, s.h_max, s.vol, s.q_p2, s.q_p, s.pinch_min, s.beta_min, s.eig_residual];
            let cols: Vec<String> = vals.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(out, "{},{}", cols.join(","), s.eig_iters)?;
        }
        Ok(())
    }

    /// Columns that do not belong in the main trace: the evolution right side,
    /// the comparison function, envelopes, cold-restart values and flags.
    pub fn write_extra_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "t,step,rhs_p,theta,psi,psi_integral,g_ratio_min,g_ratio_max,h_eig_min,h_eig_max,beta_abs_max,lambda_cold,converged,pinching_ok,trace_nonneg,beta_ok"
        )?;
        for s in &self.samples {
            let vals = [
                s.rhs_p,
                s.theta,
                s.psi,
                s.psi_integral,
                s.g_ratio_min,
                s.g_ratio_max,
                s.h_eig_min,
                s.h_eig_max,
                s.beta_abs_max,
                s.lambda_cold.unwrap_or(f64::NAN),
            ];
            let cols: Vec<String> = vals.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt_f64(s.t),
                s.step,
                cols.join(","),
                s.converged,
                s.flags.pinching_ok,
                s.flags.trace_nonneg,
                s.flags.beta_ok
            )?;
        }
        Ok(())
    }
}

struct Sampler<'a> {
    spec: &'a FlowSpec,
    params: &'a FlowParams,
    g0: MetricField,
    h_min0: Option<f64>,
    prev: Option<(ScalarField, MetricField)>,
}

impl Sampler<'_> {
    fn solve(&self, g: &MetricField, warm: Option<&ScalarField>) -> Result<EigenResult> {
        if self.params.allow_unconverged {
            solve_first_eigen_lenient(g, self.params.p, &self.params.eigen, warm)
        } else {
            solve_first_eigen(g, self.params.p, &self.params.eigen, warm)
        }
    }

    fn measure(&mut self, state: &FlowState, step_index: usize, trace: &FlowTrace) -> Result<Sample> {
        let (p, alpha) = (self.params.p, self.params.alpha);
        let g = &state.g;
        let h = &state.h_cache;
        let warm = match &self.prev {
            Some((u, g_prev)) => Some(warm_start_transport(u, g_prev, g, p)?),
            None => None,
        };
        let eig = self.solve(g, warm.as_ref())?;
        let index = trace.samples().len();
        let lambda_cold = if self.params.cold_every > 0 && index > 0 && index % self.params.cold_every == 0 {
            Some(solve_first_eigen_lenient(g, p, &self.params.eigen, None)?.lambda)
        } else {
            None
        };

        let trace_h = trace_tensor(h, g)?;
        let (h_min, h_max) = (trace_h.min(), trace_h.max());
        let h_min0 = *self.h_min0.get_or_insert(h_min);
        let psi = psi_lower_bound(h_min0, 2, state.t).unwrap_or(f64::NAN);
        let psi_integral = match trace.samples().last() {
            Some(last) => last.psi_integral + 0.5 * (state.t - last.t) * (last.psi + psi),
            None => 0.0,
        };
        let q_p = monotone_quantity_p(eig.lambda, h_min0, 2, alpha, p, state.t).unwrap_or(f64::NAN);
        let pinch_min = check_pinching(h, g, alpha)?;
        let beta = check_beta_condition(self.spec, state, self.params.beta_probe)?;
        let (g_lo, g_lo_at, g_hi, g_hi_at) = generalized_range(g.tensor(), self.g0.tensor());
        let (h_lo, _, h_hi, _) = generalized_range(h, g.tensor());

        let h_scale = h_min.abs().max(h_max.abs()).max(1.0);
        let beta_scale = (h_scale * h_scale).max(1.0);
        let flags = HypothesisFlags {
            pinching_ok: pinch_min >= -1e-6 * h_scale,
            trace_nonneg: h_min >= -1e-6 * h_scale,
            beta_ok: beta.min() >= -1e-6 * beta_scale,
            alpha,
            p,
        };

        let sample = Sample {
            step: step_index,
            t: state.t,
            lambda: eig.lambda,
            h_min,
            h_max,
            vol: volume(g),
            q_p2: monotone_quantity_p2(eig.lambda, alpha, psi_integral),
            q_p,
            pinch_min,
            beta_min: beta.min(),
            beta_abs_max: beta.max_abs(),
            eig_residual: eig.residual,
            eig_iters: eig.iters,
            converged: eig.converged,
            rhs_p: evolution_rhs_p(g, h, &eig, p)?,
            theta: theta(g, h, &eig, p, alpha)?,
            psi,
            psi_integral,
            g_ratio_min: g_lo,
            g_ratio_min_at: g_lo_at,
            g_ratio_max: g_hi,
            g_ratio_max_at: g_hi_at,
            h_eig_min: h_lo,
            h_eig_max: h_hi,
            lambda_cold,
            flags,
        };
        self.prev = Some((eig.u, g.clone()));
        Ok(sample)
    }
}

/// Advances `state` to exactly `target`, in RK4 substeps no longer than the
/// stability bound when `substep` is set.
fn advance(state: FlowState, spec: &FlowSpec, target: f64, substep: bool) -> Result<FlowState> {
    let mut st = state;
    if !substep {
        let dt = target - st.t;
        let mut next = step(&st, spec, dt)?;
        next.t = target;
        return Ok(next);
    }
    loop {
        let remaining = target - st.t;
        if remaining <= 1e-15 * target.abs().max(1.0) {
            st.t = target;
            return Ok(st);
        }
        let limit = st.stability_limit(spec);
        let m = if limit.is_finite() {
            (remaining / limit).ceil().max(1.0)
        } else {
            1.0
        };
        let dt = remaining / m;
        st = step(&st, spec, dt)?;
        if m == 1.0 {
            st.t = target;
            return Ok(st);
        }
    }
}

/// Integrates the flow from `initial` to `params.t_end`, sampling the
/// eigenpair and every monitored quantity along the way.
pub fn run_flow(initial: FlowState, spec: &FlowSpec, params: &FlowParams) -> Result<FlowTrace> {
    spec.validate()?;
    params.validate()?;
    if initial.t != 0.0 {
        return Err(Error::InvalidArgument("flows start at t = 0".into()));
    }
    let mut sampler = Sampler {
        spec,
        params,
        g0: initial.g.clone(),
        h_min0: None,
        prev: None,
    };
    let mut trace = FlowTrace::default();
    let nsteps = if params.t_end == 0.0 {
        0
    } else {
        (params.t_end / params.dt - 1e-9).ceil() as usize
    };

    let mut state = initial;
    let s0 = sampler.measure(&state, 0, &trace).map_err(|e| e.at_time(0.0))?;
    trace.push(s0)?;
    if params.snapshot_every > 0 {
        trace.snapshots.push(Snapshot {
            step: 0,
            t: 0.0,
            metric: state.g.clone(),
        });
    }
    for k in 1..=nsteps {
        let target = if k == nsteps {
            params.t_end
        } else {
            k as f64 * params.dt
        };
        let t_before = state.t;
        state = advance(state, spec, target, params.substep).map_err(|e| e.at_time(t_before))?;
        if k % params.eigen_every == 0 || k == nsteps {
            let s = sampler.measure(&state, k, &trace).map_err(|e| e.at_time(target))?;
            trace.push(s)?;
        }
        if params.snapshot_every > 0 && k % params.snapshot_every == 0 {
            trace.snapshots.push(Snapshot {
                step: k,
                t: state.t,
                metric: state.g.clone(),
            });
        }
    }
    trace.final_eigenfunction = sampler.prev.map(|(u, _)| u);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::super::FlowKind;
    use super::*;
    use crate::manifold::GridSpec;

    fn quick_params(t_end: f64, dt: f64, p: f64) -> FlowParams {
        let mut params = FlowParams::new(t_end, dt, p, 0.4);
        params.eigen.tol_residual = 1e-5;
        params
    }

    #[test]
    fn zero_time_gives_single_sample() {
        let spec = FlowSpec::new(FlowKind::Homothety { c0: 0.1 });
        let st = FlowState::new(&spec, MetricField::flat(GridSpec::unit(16).unwrap())).unwrap();
        let trace = run_flow(st, &spec, &quick_params(0.0, 0.1, 2.0)).unwrap();
        assert_eq!(trace.samples().len(), 1);
        assert_eq!(trace.samples()[0].t, 0.0);
    }

    #[test]
    fn homothety_trace_follows_scaling_law() {
        let spec = FlowSpec::new(FlowKind::Homothety { c0: 0.1 });
        let st = FlowState::new(&spec, MetricField::flat(GridSpec::unit(16).unwrap())).unwrap();
        let mut params = quick_params(0.2, 0.05, 3.0);
        params.snapshot_every = 2;
        let trace = run_flow(st, &spec, &params).unwrap();
        assert_eq!(trace.samples().len(), 5);
        assert_eq!(trace.snapshots().len(), 3);
        let l0 = trace.samples()[0].lambda;
        for s in trace.samples() {
            assert!((s.lambda / l0 - (0.3 * s.t).exp()).abs() < 1e-8, "{}", s.t);
            assert!((s.rhs_p - 0.3 * s.lambda).abs() < 1e-8 * s.lambda);
            assert!((s.g_ratio_min - (-0.2 * s.t).exp()).abs() < 1e-10, "{}", s.t);
        }
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER);
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn errors_carry_the_failing_time() {
        let spec = FlowSpec::new(FlowKind::CalibratedHomothety { c0: 0.5 });
        let st = FlowState::new(&spec, MetricField::flat(GridSpec::unit(16).unwrap())).unwrap();
        let err = run_flow(st, &spec, &quick_params(1.2, 0.25, 2.0)).unwrap_err();
        assert!(matches!(err, Error::AtTime { .. }));
        assert!(matches!(err.root(), Error::PoleReached { .. }));
    }

    #[test]
    fn push_rejects_non_increasing_time() {
        let spec = FlowSpec::new(FlowKind::Homothety { c0: 0.1 });
        let st = FlowState::new(&spec, MetricField::flat(GridSpec::unit(16).unwrap())).unwrap();
        let trace = run_flow(st, &spec, &quick_params(0.0, 0.1, 2.0)).unwrap();
        let mut copy = trace.clone();
        let s = trace.samples()[0].clone();
        assert!(copy.push(s).is_err());
    }
}
