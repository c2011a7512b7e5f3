//! Time integration of `d/dt g = -2 h` for pluggable flow tensors, plus the
//! structural side conditions monitored along a run.

mod checks;
mod run;

pub use checks::{
    check_beta_condition, check_metric_bounds, check_pinching, psi_lower_bound, MetricBoundsReport,
};
pub use run::{run_flow, FlowParams, FlowTrace, Sample, Snapshot};

use crate::error::{Error, Result};
use crate::manifold::{MetricField, ScalarField, SymTensorField};
use crate::operators::conformal_scalar_curvature;

/// Prescribed tensor families for [`FlowKind::GenericH`].
#[derive(Debug, Clone, PartialEq)]
pub enum HFamily {
    Fixed(SymTensorField),
    /// `h(t) = h0 + t h1`.
    Linear { h0: SymTensorField, h1: SymTensorField },
}

impl HFamily {
    pub fn at(&self, t: f64) -> SymTensorField {
        match self {
            HFamily::Fixed(h) => h.clone(),
            HFamily::Linear { h0, h1 } => h0.axpy(t, h1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowKind {
    GenericH(HFamily),
    /// `h = c0 g`.
    Homothety { c0: f64 },
    /// `h = c(t) g` with `c(t) = c0 / (1 - 2 c0 t)`, the constant-in-space
    /// flow for which `beta - Delta H` vanishes identically.
    CalibratedHomothety { c0: f64 },
    /// `h = Ric = (R/2) g` in the conformal class of the flat metric.
    RicciConformal2D,
    /// `h = (R/2) g`; the same flow as Ricci in two dimensions.
    Yamabe2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub kind: FlowKind,
    /// Stability constant for the curvature-driven flows:
    /// `dt <= cfl * min(h1, h2)^2 * min e^{2u}`.
    pub cfl: f64,
}

impl FlowSpec {
    pub fn new(kind: FlowKind) -> Self {
        Self { kind, cfl: 0.2 }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            FlowKind::Homothety { c0 } | FlowKind::CalibratedHomothety { c0 } if !c0.is_finite() => {
                Err(Error::validation("flow.c0", "must be finite"))
            }
            _ if !(self.cfl > 0.0 && self.cfl.is_finite()) => {
                Err(Error::validation("flow.cfl", "must be > 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_curvature_flow(&self) -> bool {
        matches!(self.kind, FlowKind::RicciConformal2D | FlowKind::Yamabe2D)
    }

    /// Blow-up time of the calibrated coefficient, if any.
    pub fn pole(&self) -> Option<f64> {
        match self.kind {
            FlowKind::CalibratedHomothety { c0 } if c0 > 0.0 => Some(1.0 / (2.0 * c0)),
            _ => None,
        }
    }

    fn calibrated(&self, c0: f64, t: f64) -> Result<f64> {
        let den = 1.0 - 2.0 * c0 * t;
        if den <= 0.0 {
            return Err(Error::PoleReached {
                t,
                pole: 1.0 / (2.0 * c0),
            });
        }
        Ok(c0 / den)
    }

    /// For flows of the form `h = phi g`, the conformal speed `phi(t, u)`;
    /// `None` for prescribed tensors.
    fn conformal_speed(&self, t: f64, u: &ScalarField) -> Result<Option<ScalarField>> {
        let grid = *u.grid();
        Ok(Some(match self.kind {
            FlowKind::Homothety { c0 } => ScalarField::constant(grid, c0),
            FlowKind::CalibratedHomothety { c0 } => ScalarField::constant(grid, self.calibrated(c0, t)?),
            FlowKind::RicciConformal2D | FlowKind::Yamabe2D => conformal_scalar_curvature(u).scale(0.5),
            FlowKind::GenericH(_) => return Ok(None),
        }))
    }

    /// `h(t, g)` on the tensor path (no conformal factor available).
    fn tensor_h(&self, t: f64, g: &MetricField) -> Result<SymTensorField> {
        match &self.kind {
            FlowKind::GenericH(fam) => {
                let h = fam.at(t);
                h.grid().ensure_same(g.grid())?;
                Ok(h)
            }
            FlowKind::Homothety { c0 } => Ok(g.tensor().scale(*c0)),
            FlowKind::CalibratedHomothety { c0 } => Ok(g.tensor().scale(self.calibrated(*c0, t)?)),
            FlowKind::RicciConformal2D | FlowKind::Yamabe2D => Err(Error::MissingConformalFactor),
        }
    }

    /// Flow tensor at an arbitrary `(t, g, u)`.
    pub(crate) fn h_at(&self, t: f64, g: &MetricField, u: Option<&ScalarField>) -> Result<SymTensorField> {
        if let Some(u) = u {
            if let Some(phi) = self.conformal_speed(t, u)? {
                return Ok(g.tensor().scale_by(&phi));
            }
        }
        self.tensor_h(t, g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    /// `u` with `g = e^{2u} delta`, tracked while the flow stays conformal.
    pub conformal_u: Option<ScalarField>,
    /// Flow tensor evaluated at this state.
    pub h_cache: SymTensorField,
}

impl FlowState {
    pub fn new(spec: &FlowSpec, g: MetricField) -> Result<Self> {
        let h_cache = spec.h_at(0.0, &g, None)?;
        Ok(Self {
            t: 0.0,
            g,
            conformal_u: None,
            h_cache,
        })
    }

    pub fn conformal(spec: &FlowSpec, u: ScalarField) -> Result<Self> {
        let g = MetricField::conformal(&u);
        let h_cache = spec.h_at(0.0, &g, Some(&u))?;
        Ok(Self {
            t: 0.0,
            g,
            conformal_u: Some(u),
            h_cache,
        })
    }

    /// Largest stable step for the curvature flows; infinite otherwise.
    pub fn stability_limit(&self, spec: &FlowSpec) -> f64 {
        if !spec.is_curvature_flow() {
            return f64::INFINITY;
        }
        let grid = self.g.grid();
        let hmin = grid.h1().min(grid.h2());
        let stretch = match &self.conformal_u {
            Some(u) => (2.0 * u.min()).exp(),
            None => 1.0,
        };
        spec.cfl * hmin * hmin * stretch
    }
}

/// The flow tensor of `spec` at `state`.
pub fn h_tensor(spec: &FlowSpec, state: &FlowState) -> Result<SymTensorField> {
    spec.h_at(state.t, &state.g, state.conformal_u.as_ref())
}

/// Conformal speed `-phi` of `u` when `h = phi g`, or `None`.
pub(crate) fn conformal_rate(spec: &FlowSpec, t: f64, u: &ScalarField) -> Result<Option<ScalarField>> {
    Ok(spec.conformal_speed(t, u)?.map(|phi| phi.scale(-1.0)))
}

/// One classical RK4 step of size `dt`.
///
/// Conformal states integrate `d/dt u = -phi` and rebuild `g = e^{2u} delta`;
/// everything else integrates the tensor equation, checking positive
/// definiteness at every stage.
pub fn step(state: &FlowState, spec: &FlowSpec, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be > 0, got {dt}")));
    }
    let limit = state.stability_limit(spec);
    if dt > limit {
        return Err(Error::StabilityViolation { dt, limit });
    }
    let t = state.t;
    if let Some(pole) = spec.pole() {
        if t + dt >= pole {
            return Err(Error::PoleReached { t: t + dt, pole });
        }
    }

    if let Some(u) = &state.conformal_u {
        if let Some(k1) = conformal_rate(spec, t, u)? {
            let rate = |s: f64, v: &ScalarField| -> Result<ScalarField> {
                Ok(conformal_rate(spec, s, v)?.expect("conformal flow"))
            };
            let k2 = rate(t + 0.5 * dt, &u.zip_map(&k1, |a, b| a + 0.5 * dt * b))?;
            let k3 = rate(t + 0.5 * dt, &u.zip_map(&k2, |a, b| a + 0.5 * dt * b))?;
            let k4 = rate(t + dt, &u.zip_map(&k3, |a, b| a + dt * b))?;
            let mut next = u.values().to_vec();
            for (k, v) in next.iter_mut().enumerate() {
                *v += dt / 6.0
                    * (k1.values()[k] + 2.0 * k2.values()[k] + 2.0 * k3.values()[k] + k4.values()[k]);
            }
            let u_new = ScalarField::new(*u.grid(), next)?;
            let g = MetricField::conformal(&u_new);
            let h_cache = spec.h_at(t + dt, &g, Some(&u_new))?;
            return Ok(FlowState {
                t: t + dt,
                g,
                conformal_u: Some(u_new),
                h_cache,
            });
        }
    }

    let g0 = state.g.tensor();
    let rate = |s: f64, g: &MetricField| -> Result<SymTensorField> { Ok(spec.tensor_h(s, g)?.scale(-2.0)) };
    let k1 = rate(t, &state.g)?;
    let k2 = rate(t + 0.5 * dt, &MetricField::new(g0.axpy(0.5 * dt, &k1))?)?;
    let k3 = rate(t + 0.5 * dt, &MetricField::new(g0.axpy(0.5 * dt, &k2))?)?;
    let k4 = rate(t + dt, &MetricField::new(g0.axpy(dt, &k3))?)?;
    let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).axpy(1.0, &k4);
    let g = MetricField::new(g0.axpy(dt / 6.0, &incr))?;
    let h_cache = spec.tensor_h(t + dt, &g)?;
    Ok(FlowState {
        t: t + dt,
        g,
        conformal_u: None,
        h_cache,
    })
}
