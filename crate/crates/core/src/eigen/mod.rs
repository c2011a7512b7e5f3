//! First nonzero eigenpair of the p-Laplacian under the normalization
//! `int |u|^p dmu = 1` and the orthogonality constraint
//! `int |u|^{p-2} u dmu = 0`.

mod constraint;
mod inverse;
mod precond;
mod projected;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use constraint::{
    abs_pow, constraint_value, normalize_p, p_mass, project_constraint, signed_pow,
};
pub use inverse::{perelman_eigen, perelman_lambda};
use constraint::retract;
pub use precond::{remove_alternating_modes, SpectralSolver};

use crate::error::{Error, Result};
use crate::manifold::{integrate, MetricField, ScalarField};
use crate::operators::{check_p, p_laplacian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    ProjectedGradient,
    /// Shifted inverse power iteration; `p = 2` only.
    InverseIteration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenConfig {
    /// Stop when the relative change of lambda drops below this...
    pub tol_lambda: f64,
    /// ...and the L2 residual of the Euler-Lagrange equation below this,
    /// measured against `max(1, |lambda|)`.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Initial projected-gradient step.
    pub step0: f64,
    /// Gradient regularization floor; `None` applies the default policy.
    pub eps: Option<f64>,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Random starts tried by a cold solve with `p != 2` (seeds `seed`,
    /// `seed + 1`, ...). The quotient has several local minima away from
    /// `p = 2`, so the lowest converged candidate is kept.
    pub starts: usize,
    /// Step in `p` of the extra cold candidate obtained by continuation from
    /// the linear problem at `p = 2`; `0` disables it.
    pub continuation_step: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tol_lambda: 1e-11,
            tol_residual: 1e-6,
            max_iter: 20_000,
            step0: 0.5,
            eps: None,
            seed: 42,
            algorithm: Algorithm::ProjectedGradient,
            starts: 4,
            continuation_step: 0.25,
        }
    }
}

impl EigenConfig {
    /// Absolute residual accepted at eigenvalue `lambda`.
    pub fn residual_bound(&self, lambda: f64) -> f64 {
        self.tol_residual * lambda.abs().max(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_lambda > 0.0) {
            return Err(Error::validation("eigen.tol_lambda", "must be > 0"));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::validation("eigen.tol_residual", "must be > 0"));
        }
        if self.max_iter < 1 {
            return Err(Error::validation("eigen.max_iter", "must be >= 1"));
        }
        if self.starts < 1 {
            return Err(Error::validation("eigen.starts", "must be >= 1"));
        }
        if !(self.continuation_step >= 0.0 && self.continuation_step.is_finite()) {
            return Err(Error::validation("eigen.continuation_step", "must be >= 0"));
        }
        if !(self.step0 > 0.0) {
            return Err(Error::validation("eigen.step0", "must be > 0"));
        }
        if let Some(e) = self.eps {
            if !(e >= 0.0) {
                return Err(Error::validation("eigen.eps", "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Regularization actually used: `1e-8` below `p = 2`, none otherwise,
    /// unless set explicitly. Eigenfunctions are normalized, so the field
    /// scale is one.
    pub fn eps_for(&self, p: f64) -> f64 {
        self.eps.unwrap_or(if p < 2.0 { 1e-8 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda: f64,
    pub u: ScalarField,
    pub residual: f64,
    pub iters: usize,
    pub converged: bool,
    /// Rayleigh quotient after each accepted iteration.
    pub history: Vec<f64>,
}

/// L2(dmu) norm of `Delta_p u + lambda |u|^{p-2} u`.
pub fn pde_residual(u: &ScalarField, lambda: f64, g: &MetricField, p: f64, eps: f64) -> Result<f64> {
    let lap = p_laplacian(u, g, p, eps)?;
    let r = lap.zip_map(u, |l, v| l + lambda * signed_pow(v, p));
    Ok(integrate(&r.map(|v| v * v), g)?.sqrt())
}

/// Flips the sign so the largest-magnitude entry is positive.
pub fn canonicalize(u: ScalarField) -> ScalarField {
    let k = u.argmax_abs();
    if u.values()[k] < 0.0 {
        u.scale(-1.0)
    } else {
        u
    }
}

/// Seeded bandlimited noise (modes <= 4), projected and normalized.
pub fn random_start(g: &MetricField, p: f64, seed: u64) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = ScalarField::random_bandlimited(*g.grid(), 4, 1.0, &mut rng);
    retract(&f, g, p)
}

/// Carries an eigenfunction from `g_prev` to `g_now`:
/// `u_prev (det g_prev / det g_now)^{1/(2(p-2))}`, re-projected and
/// re-normalized on `g_now`. The determinant exponent is singular at `p = 2`,
/// where `u_prev` is reused as is.
pub fn warm_start_transport(
    u_prev: &ScalarField,
    g_prev: &MetricField,
    g_now: &MetricField,
    p: f64,
) -> Result<ScalarField> {
    check_p(p)?;
    u_prev.grid().ensure_same(g_prev.grid())?;
    u_prev.grid().ensure_same(g_now.grid())?;
    let carried = if p == 2.0 {
        u_prev.clone()
    } else {
        // sqrt-det ratio to the power 1/(p-2) equals the det ratio to 1/(2(p-2))
        let e = 1.0 / (p - 2.0);
        let ratio = g_prev.sqrt_det().zip_map(g_now.sqrt_det(), |a, b| (a / b).powf(e));
        u_prev.mul(&ratio)
    };
    retract(&carried, g_now, p)
}

const RUNG_TOL: f64 = 1e-4;
const RUNG_MAX_ITER: usize = 500;

/// Cold solve for `p != 2`: the continuation branch from `p = 2` plus
/// `cfg.starts` random starts, keeping the lowest converged quotient (or the
/// lowest overall if none converged). `iters` is the total over candidates.
fn multistart(g: &MetricField, p: f64, cfg: &EigenConfig) -> Result<EigenResult> {
    let mut candidates = Vec::with_capacity(cfg.starts + 1);
    for k in 0..cfg.starts {
        let c = EigenConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..cfg.clone()
        };
        candidates.push(projected::solve(g, p, &c, None)?);
    }
    if cfg.continuation_step > 0.0 {
        // Intermediate rungs only steer the path; they get a loose budget.
        let rung = EigenConfig {
            tol_residual: cfg.tol_residual.max(RUNG_TOL),
            max_iter: cfg.max_iter.min(RUNG_MAX_ITER),
            ..cfg.clone()
        };
        let mut r = projected::solve(g, 2.0, &rung, None)?;
        let n = ((p - 2.0).abs() / cfg.continuation_step).ceil().max(1.0) as usize;
        for k in 1..n {
            let q = 2.0 + (p - 2.0) * k as f64 / n as f64;
            r = projected::solve(g, q, &rung, Some(&r.u))?;
        }
        candidates.push(projected::solve(g, p, cfg, Some(&r.u))?);
    }
    let total: usize = candidates.iter().map(|c| c.iters).sum();
    let any_converged = candidates.iter().any(|c| c.converged);
    let mut best = candidates
        .into_iter()
        .filter(|c| c.converged || !any_converged)
        .min_by(|a, b| a.lambda.total_cmp(&b.lambda))
        .expect("at least one candidate");
    best.iters = total;
    Ok(best)
}

/// Minimizes the Rayleigh quotient over the constraint set.
///
/// Without a warm start and for `p != 2` several candidates are tried (see
/// [`EigenConfig::starts`]); a warm start is followed on its own branch.
/// Returns `NotConverged` carrying the best iterate when the stopping test is
/// not met within `max_iter`.
pub fn solve_first_eigen(
    g: &MetricField,
    p: f64,
    cfg: &EigenConfig,
    warm: Option<&ScalarField>,
) -> Result<EigenResult> {
    check_p(p)?;
    cfg.validate()?;
    if let Some(w) = warm {
        w.grid().ensure_same(g.grid())?;
    }
    let result = match cfg.algorithm {
        Algorithm::ProjectedGradient if warm.is_none() && p != 2.0 => multistart(g, p, cfg)?,
        Algorithm::ProjectedGradient => projected::solve(g, p, cfg, warm)?,
        Algorithm::InverseIteration => {
            if p != 2.0 {
                return Err(Error::InvalidArgument(
                    "inverse iteration is only available for p = 2".into(),
                ));
            }
            inverse::solve_laplace(g, cfg, warm)?
        }
    };
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged(Box::new(result)))
    }
}

/// Like [`solve_first_eigen`] but hands back the best iterate on `NotConverged`.
pub fn solve_first_eigen_lenient(
    g: &MetricField,
    p: f64,
    cfg: &EigenConfig,
    warm: Option<&ScalarField>,
) -> Result<EigenResult> {
    match solve_first_eigen(g, p, cfg, warm) {
        Err(Error::NotConverged(r)) => Ok(*r),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::GridSpec;
    use crate::operators::rayleigh_quotient;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn analytic_pair_has_small_residual() {
        let grid = GridSpec::unit(64).unwrap();
        let g = MetricField::flat(grid);
        let u = normalize_p(&ScalarField::from_fn(grid, |x, _| (TAU * x).sin()), &g, 2.0).unwrap();
        let r = pde_residual(&u, 4.0 * PI * PI, &g, 2.0, 0.0).unwrap();
        // O(h^4) symbol error times lambda
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn transport_identity_and_homothety() {
        let grid = GridSpec::unit(32).unwrap();
        let u0 = ScalarField::from_fn(grid, |x, y| 0.1 * (TAU * x).sin() * (TAU * y).cos());
        let g = MetricField::conformal(&u0);
        let u = random_start(&g, 4.0, 5).unwrap();
        let same = warm_start_transport(&u, &g, &g, 4.0).unwrap();
        assert!(same.sub(&u).max_abs() < 1e-10);

        let s = 1.7;
        let gs = g.scaled(s).unwrap();
        let out = warm_start_transport(&u, &g, &gs, 4.0).unwrap();
        assert!((p_mass(&out, &gs, 4.0).unwrap() - 1.0).abs() < 1e-12);
        // constant determinant ratio: shape unchanged, only renormalized
        let expect = u.scale(s.powf(-0.25));
        assert!(out.sub(&expect).max_abs() < 1e-10);
        let q0 = rayleigh_quotient(&u, &g, 4.0).unwrap();
        let q1 = rayleigh_quotient(&out, &gs, 4.0).unwrap();
        assert!((q1 / q0 - s.powf(-2.0)).abs() < 1e-12);
    }

    #[test]
    fn transport_output_satisfies_constraints() {
        let grid = GridSpec::unit(24).unwrap();
        let a = ScalarField::from_fn(grid, |x, y| 0.2 * (TAU * (x - y)).sin());
        let b = ScalarField::from_fn(grid, |x, _| 0.1 * (TAU * x).cos());
        let (ga, gb) = (MetricField::conformal(&a), MetricField::conformal(&b));
        for p in [1.5, 2.0, 3.0] {
            let u = random_start(&ga, p, 11).unwrap();
            let v = warm_start_transport(&u, &ga, &gb, p).unwrap();
            assert!((p_mass(&v, &gb, p).unwrap() - 1.0).abs() < 1e-12);
            assert!(constraint_value(&v, &gb, p).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = EigenConfig::default();
        assert!(c.validate().is_ok());
        c.max_iter = 0;
        assert!(c.validate().is_err());
        assert_eq!(EigenConfig::default().eps_for(1.5), 1e-8);
        assert_eq!(EigenConfig::default().eps_for(3.0), 0.0);
    }
}
