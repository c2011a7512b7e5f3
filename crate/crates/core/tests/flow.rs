use std::f64::consts::TAU;

use psf_core::eigen::{solve_first_eigen, EigenConfig};
use psf_core::flow::{run_flow, step, FlowKind, FlowParams, FlowSpec, FlowState, HFamily};
use psf_core::manifold::{volume, GridSpec, MetricField, ScalarField, SymTensorField};
use psf_core::Error;

fn bump(grid: GridSpec, a: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| a * (TAU * x).sin() * (TAU * y).cos())
}

fn integrate_to(mut s: FlowState, spec: &FlowSpec, t_end: f64, n: usize) -> FlowState {
    let dt = t_end / n as f64;
    for _ in 0..n {
        s = step(&s, spec, dt).unwrap();
    }
    s
}

#[test]
fn tensor_rk4_is_fourth_order() {
    // g(t) = e^{-2 c t} g0 for h = c g, integrated on the tensor path.
    let grid = GridSpec::unit(8).unwrap();
    let spec = FlowSpec::new(FlowKind::Homothety { c0: 3.0 });
    let g0 = MetricField::conformal(&bump(grid, 0.2));
    let t_end = 0.5;
    let err = |n: usize| {
        let s = integrate_to(FlowState::new(&spec, g0.clone()).unwrap(), &spec, t_end, n);
        let exact = g0.tensor().scale((-2.0 * 3.0 * t_end).exp());
        s.g.tensor().axpy(-1.0, &exact).max_abs()
    };
    let (e1, e2) = (err(40), err(80));
    let ratio = e1 / e2;
    assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio} ({e1}, {e2})");
}

#[test]
fn calibrated_homothety_follows_closed_form() {
    let grid = GridSpec::unit(16).unwrap();
    let c0 = 0.5;
    let spec = FlowSpec::new(FlowKind::CalibratedHomothety { c0 });
    let u0 = bump(grid, 0.1);
    let s = integrate_to(FlowState::conformal(&spec, u0.clone()).unwrap(), &spec, 0.6, 600);
    // g(t) = (1 - 2 c0 t) g0, so u(t) = u0 + ln(1 - 2 c0 t) / 2.
    let shift = 0.5 * (1.0 - 2.0 * c0 * 0.6f64).ln();
    let u = s.conformal_u.unwrap();
    let err = u.sub(&u0.map(|v| v + shift)).max_abs();
    assert!(err < 1e-10, "{err}");
}

#[test]
fn generic_linear_family_is_integrated_exactly() {
    // h(t) = h0 + t h1 gives g(t) = g0 - 2 t h0 - t^2 h1, a polynomial RK4 reproduces.
    let grid = GridSpec::unit(8).unwrap();
    let h0 = SymTensorField::from_fn(grid, |x, _| [0.1 * (TAU * x).cos(), 0.05, -0.1]);
    let h1 = SymTensorField::constant(grid, [0.2, 0.0, 0.1]);
    let spec = FlowSpec::new(FlowKind::GenericH(HFamily::Linear { h0: h0.clone(), h1: h1.clone() }));
    let g0 = MetricField::flat(grid);
    let t = 0.3;
    let s = integrate_to(FlowState::new(&spec, g0.clone()).unwrap(), &spec, t, 7);
    let exact = g0.tensor().axpy(-2.0 * t, &h0).axpy(-t * t, &h1);
    assert!(s.g.tensor().axpy(-1.0, &exact).max_abs() < 1e-14);
}

#[test]
fn ricci_flow_preserves_area_and_flattens() {
    let grid = GridSpec::unit(32).unwrap();
    let spec = FlowSpec::new(FlowKind::RicciConformal2D);
    let s0 = FlowState::conformal(&spec, bump(grid, 0.2)).unwrap();
    let v0 = volume(&s0.g);
    let dt = 0.5 * s0.stability_limit(&spec);
    let n = (0.02 / dt).ceil() as usize;
    let s = integrate_to(s0.clone(), &spec, n as f64 * dt, n);
    assert!((volume(&s.g) - v0).abs() < 1e-8 * v0, "{} vs {v0}", volume(&s.g));
    // u relaxes towards a constant.
    let osc = |st: &FlowState| {
        let u = st.conformal_u.as_ref().unwrap();
        u.max() - u.min()
    };
    assert!(osc(&s) < 0.5 * osc(&s0));
}

#[test]
fn yamabe_and_ricci_coincide_in_two_dimensions() {
    let grid = GridSpec::unit(24).unwrap();
    let u0 = bump(grid, 0.15);
    let ricci = FlowSpec::new(FlowKind::RicciConformal2D);
    let yamabe = FlowSpec::new(FlowKind::Yamabe2D);
    let a = FlowState::conformal(&ricci, u0.clone()).unwrap();
    let dt = 0.5 * a.stability_limit(&ricci);
    let a = integrate_to(a, &ricci, 20.0 * dt, 20);
    let b = integrate_to(FlowState::conformal(&yamabe, u0).unwrap(), &yamabe, 20.0 * dt, 20);
    assert_eq!(a.g, b.g);
}

#[test]
fn flat_metric_is_a_ricci_fixed_point() {
    let grid = GridSpec::unit(16).unwrap();
    let spec = FlowSpec::new(FlowKind::RicciConformal2D);
    let s = FlowState::conformal(&spec, ScalarField::zeros(grid)).unwrap();
    let dt = 0.5 * s.stability_limit(&spec);
    let s = integrate_to(s, &spec, 10.0 * dt, 10);
    assert!(s.g.tensor().axpy(-1.0, MetricField::flat(grid).tensor()).max_abs() < 1e-15);
}

#[test]
fn oversized_ricci_step_is_rejected() {
    let grid = GridSpec::unit(64).unwrap();
    let spec = FlowSpec::new(FlowKind::RicciConformal2D);
    let s = FlowState::conformal(&spec, bump(grid, 0.1)).unwrap();
    let limit = s.stability_limit(&spec);
    match step(&s, &spec, 2.0 * limit) {
        Err(Error::StabilityViolation { dt, limit: l }) => assert!(dt > l),
        other => panic!("expected a stability error, got {other:?}"),
    }
    // the same sample step is fine once substepping is on
    let mut params = FlowParams::new(4.0 * limit, 2.0 * limit, 2.0, 0.5);
    assert!(run_flow(s.clone(), &spec, &params).is_err());
    params.substep = true;
    let trace = run_flow(s, &spec, &params).unwrap();
    assert_eq!(trace.samples().len(), 3);
}

#[test]
fn calibrated_flow_stops_at_the_pole() {
    let grid = GridSpec::unit(8).unwrap();
    let spec = FlowSpec::new(FlowKind::CalibratedHomothety { c0: 1.0 });
    let s = FlowState::conformal(&spec, ScalarField::zeros(grid)).unwrap();
    let params = FlowParams::new(0.6, 0.05, 2.0, 0.5);
    let err = run_flow(s, &spec, &params).unwrap_err();
    assert!(matches!(err.root(), Error::PoleReached { pole, .. } if (*pole - 0.5).abs() < 1e-15), "{err}");
}

#[test]
fn traced_eigenvalue_follows_the_homothety_law() {
    // Along h = c(t) g the metric stays homothetic to g0, g(t) = s(t) g0 with
    // s = vol(t) / vol(0), and lambda(t) = s^{-p/2} lambda(0).
    let grid = GridSpec::unit(16).unwrap();
    let (c0, p) = (0.5, 3.0);
    let spec = FlowSpec::new(FlowKind::CalibratedHomothety { c0 });
    let u0 = bump(grid, 0.1);
    let eigen = EigenConfig {
        tol_residual: 1e-9,
        ..EigenConfig::default()
    };
    let lambda0 = solve_first_eigen(&MetricField::conformal(&u0), p, &eigen, None).unwrap().lambda;
    let mut params = FlowParams::new(0.5, 0.05, p, 0.4);
    params.eigen = eigen;
    let trace = run_flow(FlowState::conformal(&spec, u0).unwrap(), &spec, &params).unwrap();
    let vol0 = trace.samples()[0].vol;
    for s in trace.samples() {
        let scale = s.vol / vol0;
        assert!((scale - (1.0 - 2.0 * c0 * s.t)).abs() < 1e-6, "t = {}: scale {scale}", s.t);
        let expect = scale.powf(-p / 2.0) * lambda0;
        assert!((s.lambda - expect).abs() < 1e-10 * expect, "t = {}: {} vs {expect}", s.t, s.lambda);
    }
}
