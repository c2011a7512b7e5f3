//! Run orchestration behind the `psf` binary.
//!
//! Each command reads a [`RunConfig`], writes its artifacts to the output
//! directory together with `resolved_config.txt`, and maps the outcome onto an
//! exit code: 0 success, 1 a check failed, 2 runtime or configuration error.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{EigenMode, FlowChoice, FlowDescriptor, LemmaSettings, MetricKind, MetricSpec, RunConfig};

use crate::eigen::{perelman_eigen, solve_first_eigen, solve_first_eigen_lenient, EigenResult};
use crate::error::{Error, Result};
use crate::flow::{run_flow, FlowKind, FlowParams, FlowSpec, FlowState, FlowTrace, HFamily};
use crate::harness::{lemma_suite, verify_trace, CheckRow, LemmaResidual, Report, VerifyOptions};
use crate::manifold::snapshot::{fmt_f64, write_scalar, write_tensor};
use crate::manifold::{grad_norm_sq, GridSpec, MetricField, ScalarField, SymTensorField};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

// Independent RNG streams derived from `run.seed`.
const STREAM_METRIC: u64 = 1;
const STREAM_FLOW: u64 = 2;
const STREAM_LEMMA_H: u64 = 3;
const STREAM_LEMMA_F: u64 = 4;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Conformal factor `u` of the initial metric `g = e^{2u} delta` on `grid`.
pub fn initial_conformal_factor(cfg: &RunConfig, grid: GridSpec) -> ScalarField {
    let m = &cfg.metric;
    let shift = 0.5 * m.scale.ln();
    let (l1, l2) = (grid.l1(), grid.l2());
    let base = match m.kind {
        MetricKind::Flat => ScalarField::zeros(grid),
        MetricKind::SinSin => ScalarField::from_fn(grid, |x, y| {
            m.amplitude * (std::f64::consts::TAU * x / l1).sin() * (std::f64::consts::TAU * y / l2).sin()
        }),
        MetricKind::Random => {
            ScalarField::random_bandlimited(grid, m.max_mode, m.amplitude, &mut rng(cfg.seed, STREAM_METRIC))
        }
    };
    base.map(|v| v + shift)
}

pub fn initial_metric(cfg: &RunConfig) -> MetricField {
    MetricField::conformal(&initial_conformal_factor(cfg, cfg.grid))
}

pub fn flow_spec(cfg: &RunConfig) -> Result<FlowSpec> {
    let f = &cfg.flow;
    let kind = match f.kind {
        FlowChoice::Homothety => FlowKind::Homothety { c0: f.c0 },
        FlowChoice::Calibrated => FlowKind::CalibratedHomothety { c0: f.c0 },
        FlowChoice::Ricci => FlowKind::RicciConformal2D,
        FlowChoice::Yamabe => FlowKind::Yamabe2D,
        FlowChoice::FixedRandom => {
            let h = SymTensorField::random_bandlimited(
                cfg.grid,
                f.h_max_mode,
                f.h_amplitude,
                &mut rng(cfg.seed, STREAM_FLOW),
            );
            FlowKind::GenericH(HFamily::Fixed(h))
        }
    };
    let mut spec = FlowSpec::new(kind);
    spec.cfl = f.cfl;
    Ok(spec)
}

/// Flow description and its state at `t = 0`.
pub fn initial_state(cfg: &RunConfig) -> Result<(FlowSpec, FlowState)> {
    let spec = flow_spec(cfg)?;
    let u = initial_conformal_factor(cfg, cfg.grid);
    let state = match spec.kind {
        FlowKind::GenericH(_) => FlowState::new(&spec, MetricField::conformal(&u))?,
        _ => FlowState::conformal(&spec, u)?,
    };
    Ok((spec, state))
}

pub fn flow_params(cfg: &RunConfig, allow_unconverged: bool) -> FlowParams {
    let mut params = FlowParams::new(cfg.t_end, cfg.dt, cfg.p, cfg.alpha);
    params.eigen = cfg.eigen.clone();
    params.eigen_every = cfg.eigen_every;
    params.snapshot_every = cfg.snapshot_every;
    params.cold_every = cfg.cold_every;
    params.substep = cfg.substep;
    params.beta_probe = cfg.beta_probe;
    params.allow_unconverged = allow_unconverged;
    params
}

/// Integrates the configured flow and runs the configured checks.
pub fn execute_run(cfg: &RunConfig, allow_unconverged: bool) -> Result<(FlowTrace, Report)> {
    let (spec, state) = initial_state(cfg)?;
    let trace = run_flow(state, &spec, &flow_params(cfg, allow_unconverged))?;
    let report = verify_trace(
        &trace,
        &VerifyOptions {
            checks: cfg.checks.clone(),
            alpha: cfg.alpha,
            p: cfg.p,
        },
    )?;
    Ok((trace, report))
}

/// The standalone solve of the `eigen` command.
pub fn execute_eigen(cfg: &RunConfig, allow_unconverged: bool) -> Result<EigenResult> {
    let g = initial_metric(cfg);
    match (cfg.mode, allow_unconverged) {
        (EigenMode::Perelman, _) => perelman_eigen(&g, &cfg.eigen),
        (EigenMode::PLaplacian, false) => solve_first_eigen(&g, cfg.p, &cfg.eigen, None),
        (EigenMode::PLaplacian, true) => solve_first_eigen_lenient(&g, cfg.p, &cfg.eigen, None),
    }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub n1: usize,
    pub n2: usize,
    pub h: f64,
    pub lambda: f64,
    /// `NaN` for the finest level of a self-convergence study.
    pub error: f64,
    pub residual: f64,
    pub iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<LevelRow>,
    /// Reference value, analytic when known.
    pub reference: f64,
    pub analytic: bool,
    /// Least-squares slope of `log error` against `log h`.
    pub order: f64,
    pub passed: bool,
}

/// `lambda_{2,1}` of the flat torus `s delta` with side lengths `L1, L2`.
fn flat_torus_lambda(cfg: &RunConfig) -> Option<f64> {
    let flat = cfg.metric.kind == MetricKind::Flat || cfg.metric.amplitude == 0.0;
    if flat && cfg.p == 2.0 && cfg.mode == EigenMode::PLaplacian {
        let l = cfg.grid.l1().max(cfg.grid.l2());
        Some((std::f64::consts::TAU / l).powi(2) / cfg.metric.scale)
    } else {
        None
    }
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Solves on each level of `cfg.levels` (the first grid axis; the second is
/// scaled in proportion) and fits the observed order of convergence.
///
/// Against an analytic value every level contributes and the fitted order
/// must reach `convergence.min_order`. Otherwise errors are measured against
/// the finest level and must decrease monotonically.
pub fn convergence_study(cfg: &RunConfig, allow_unconverged: bool) -> Result<ConvergenceTable> {
    let aspect = cfg.grid.n2() as f64 / cfg.grid.n1() as f64;
    let mut rows = Vec::new();
    for &n in &cfg.levels {
        let n2 = ((n as f64) * aspect).round().max(1.0) as usize;
        let mut level = cfg.clone();
        level.grid = GridSpec::new(n, n2, cfg.grid.l1(), cfg.grid.l2())
            .map_err(|e| Error::validation("convergence.levels", e.to_string()))?;
        let eig = execute_eigen(&level, allow_unconverged)?;
        rows.push(LevelRow {
            n1: n,
            n2,
            h: level.grid.h1().max(level.grid.h2()),
            lambda: eig.lambda,
            error: f64::NAN,
            residual: eig.residual,
            iters: eig.iters,
        });
    }
    let (reference, analytic) = match flat_torus_lambda(cfg) {
        Some(v) => (v, true),
        None => (rows.last().map_or(f64::NAN, |r| r.lambda), false),
    };
    let measured = if analytic { rows.len() } else { rows.len() - 1 };
    for r in rows.iter_mut().take(measured) {
        r.error = (r.lambda - reference).abs();
    }
    let errs: Vec<&LevelRow> = rows.iter().take(measured).collect();
    let usable: Vec<&&LevelRow> = errs.iter().filter(|r| r.error > 0.0).collect();
    let order = if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|r| r.h.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|r| r.error.ln()).collect();
        fit_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    let decreasing = errs.windows(2).all(|w| w[1].error < w[0].error);
    let passed = if analytic {
        order >= cfg.min_order
    } else {
        decreasing
    };
    Ok(ConvergenceTable {
        rows,
        reference,
        analytic,
        order,
        passed,
    })
}

/// Inputs of the variation identities: the configured metric with seeded
/// band-limited `h` and `f`.
///
/// With `lemmas.normalize` the fields are rescaled so that
/// `max |grad f|_g = 1` and `max |h_ij| = min e^{2u}`.
pub fn lemma_inputs(cfg: &RunConfig) -> Result<(MetricField, SymTensorField, ScalarField)> {
    let u = initial_conformal_factor(cfg, cfg.grid);
    let g = MetricField::conformal(&u);
    let mode = cfg.lemmas.max_mode;
    let mut h = SymTensorField::random_bandlimited(cfg.grid, mode, 1.0, &mut rng(cfg.seed, STREAM_LEMMA_H));
    let mut f = ScalarField::random_bandlimited(cfg.grid, mode, 1.0, &mut rng(cfg.seed, STREAM_LEMMA_F));
    if cfg.lemmas.normalize {
        let grad_max = grad_norm_sq(&f, &g)?.max().sqrt();
        let h_max = h.max_abs();
        if grad_max == 0.0 || h_max == 0.0 {
            return Err(Error::DegenerateInput("random lemma field vanished".into()));
        }
        f = f.scale(1.0 / grad_max);
        h = h.scale(u.map(|v| (2.0 * v).exp()).min() / h_max);
    }
    Ok((g, h, f))
}

/// Probe step pair used for the convergence-order rows.
pub const LEMMA_ORDER_STEPS: (f64, f64) = (1e-3, 5e-4);

/// Runs the identities at `lemmas.dt_probe` (absolute bound) and at the pair
/// [`LEMMA_ORDER_STEPS`] (ratio `4 +- 0.5`).
pub fn execute_lemmas(cfg: &RunConfig) -> Result<(Vec<LemmaResidual>, Report)> {
    let (g, h, f) = lemma_inputs(cfg)?;
    let at = lemma_suite(&g, &h, &f, cfg.lemmas.dt_probe, cfg.p)?;
    let coarse = lemma_suite(&g, &h, &f, LEMMA_ORDER_STEPS.0, cfg.p)?;
    let fine = lemma_suite(&g, &h, &f, LEMMA_ORDER_STEPS.1, cfg.p)?;
    let mut report = Report::default();
    for r in &at {
        report.push(CheckRow::equality(&format!("lemma_{}", r.name), 0.0, r.max_abs, 0.0, cfg.lemmas.tol));
    }
    for (a, b) in coarse.iter().zip(&fine) {
        let ratio = a.max_abs / b.max_abs;
        report.push(CheckRow::equality(&format!("lemma_order_{}", a.name), 0.0, ratio, 4.0, 0.5));
    }
    Ok((at, report))
}

/// Command-line options shared by every subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CliOptions {
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dump_eigenfunction: bool,
    pub allow_unconverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Eigen,
    Convergence,
    VerifyLemmas,
}

/// Reads `PSF_THREADS`. Every kernel is single-threaded, so the value is only
/// validated; a malformed value is a configuration error.
pub fn thread_cap(var: Option<&str>) -> Result<Option<usize>> {
    match var {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::validation("PSF_THREADS", format!("expected a positive integer, got `{s}`"))),
        },
    }
}

pub fn load_config(opts: &CliOptions) -> Result<RunConfig> {
    let text = match &opts.config {
        Some(path) => fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut overrides = Vec::new();
    if let Some(seed) = opts.seed {
        overrides.push(("run.seed", seed.to_string()));
    }
    if let Some(dir) = &opts.output {
        overrides.push(("output.dir", dir.display().to_string()));
    }
    RunConfig::parse_with(&text, &overrides)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(dir, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn prepare_output(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    write_with(&dir, "resolved_config.txt", |w| Ok(w.write_all(cfg.resolved_text().as_bytes())?))?;
    Ok(dir)
}

fn cmd_run(cfg: &RunConfig, opts: &CliOptions, out: &mut dyn Write) -> Result<i32> {
    let dir = prepare_output(cfg)?;
    let (trace, report) = execute_run(cfg, opts.allow_unconverged)?;
    write_with(&dir, "trace.csv", |w| trace.write_csv(w))?;
    write_with(&dir, "trace_extra.csv", |w| trace.write_extra_csv(w))?;
    write_with(&dir, "report.csv", |w| report.write_csv(w))?;
    for snap in trace.snapshots() {
        write_with(&dir, &format!("snap_{}.csv", snap.step), |w| write_tensor(w, snap.metric.tensor()))?;
    }
    if opts.dump_eigenfunction {
        if let Some(u) = trace.final_eigenfunction() {
            write_with(&dir, "eigenfunction.csv", |w| write_scalar(w, u))?;
        }
    }
    let s = trace.samples();
    let last = &s[s.len() - 1];
    writeln!(out, "samples {}", s.len())?;
    writeln!(out, "lambda(0) {}", fmt_f64(s[0].lambda))?;
    writeln!(out, "lambda(T) {}", fmt_f64(last.lambda))?;
    let fails = report.failures().count();
    writeln!(out, "checks {} rows, {} failed", report.rows().len(), fails)?;
    for row in report.failures().take(10) {
        writeln!(out, "FAIL {} at t = {}: lhs {} rhs {}", row.check, row.location_t, row.lhs, row.rhs)?;
    }
    Ok(if fails == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_eigen(cfg: &RunConfig, opts: &CliOptions, out: &mut dyn Write) -> Result<i32> {
    let dir = prepare_output(cfg)?;
    let eig = execute_eigen(cfg, opts.allow_unconverged)?;
    let label = match cfg.mode {
        EigenMode::PLaplacian => "lambda",
        EigenMode::Perelman => "lambda_perelman",
    };
    writeln!(out, "{label} {}", fmt_f64(eig.lambda))?;
    writeln!(out, "residual {}", fmt_f64(eig.residual))?;
    writeln!(out, "iters {}", eig.iters)?;
    writeln!(out, "converged {}", eig.converged)?;
    if opts.dump_eigenfunction {
        write_with(&dir, "eigenfunction.csv", |w| write_scalar(w, &eig.u))?;
    }
    Ok(EXIT_OK)
}

fn cmd_convergence(cfg: &RunConfig, opts: &CliOptions, out: &mut dyn Write) -> Result<i32> {
    let dir = prepare_output(cfg)?;
    let table = convergence_study(cfg, opts.allow_unconverged)?;
    write_with(&dir, "convergence.csv", |w| {
        writeln!(w, "n1,n2,h,lambda,error,residual,iters")?;
        for r in &table.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.n1,
                r.n2,
                fmt_f64(r.h),
                fmt_f64(r.lambda),
                fmt_f64(r.error),
                fmt_f64(r.residual),
                r.iters
            )?;
        }
        Ok(())
    })?;
    let kind = if table.analytic { "analytic" } else { "finest level" };
    writeln!(out, "reference ({kind}) {}", fmt_f64(table.reference))?;
    for r in &table.rows {
        writeln!(out, "n = {:4}  lambda {}  error {:.3e}", r.n1, fmt_f64(r.lambda), r.error)?;
    }
    writeln!(out, "observed order {:.4}", table.order)?;
    writeln!(out, "pass {}", table.passed)?;
    Ok(if table.passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_lemmas(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let dir = prepare_output(cfg)?;
    let (residuals, report) = execute_lemmas(cfg)?;
    write_with(&dir, "lemmas.csv", |w| report.write_csv(w))?;
    for r in &residuals {
        writeln!(out, "{:16} max_abs {:.3e} scale {:.3e}", r.name, r.max_abs, r.scale)?;
    }
    let fails = report.failures().count();
    writeln!(out, "checks {} rows, {} failed", report.rows().len(), fails)?;
    Ok(if fails == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Runs `cmd`, writing progress to `out` and diagnostics to `err`, and
/// returns the process exit code.
pub fn execute(cmd: Command, opts: &CliOptions, threads: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = thread_cap(threads).and_then(|_| load_config(opts)).and_then(|cfg| {
        for w in &cfg.warnings {
            let _ = writeln!(err, "warning: {w}");
        }
        match cmd {
            Command::Run => cmd_run(&cfg, opts, out),
            Command::Eigen => cmd_eigen(&cfg, opts, out),
            Command::Convergence => cmd_convergence(&cfg, opts, out),
            Command::VerifyLemmas => cmd_lemmas(&cfg, out),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_cap_parsing() {
        assert_eq!(thread_cap(None).unwrap(), None);
        assert_eq!(thread_cap(Some("4")).unwrap(), Some(4));
        assert!(thread_cap(Some("0")).is_err());
        assert!(thread_cap(Some("many")).is_err());
    }

    #[test]
    fn initial_metric_kinds() {
        let cfg = RunConfig::parse("grid.n1 = 16\ngrid.n2 = 16\nmetric.scale = 4").unwrap();
        let g = initial_metric(&cfg);
        assert!((g.tensor().t11()[5] - 4.0).abs() < 1e-14);
        let cfg = RunConfig::parse("grid.n1 = 16\ngrid.n2 = 16\nmetric.kind = sin_sin").unwrap();
        let u = initial_conformal_factor(&cfg, cfg.grid);
        assert!((u.max() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn random_inputs_depend_only_on_seed() {
        let cfg = RunConfig::parse("grid.n1 = 16\ngrid.n2 = 16\nmetric.kind = random").unwrap();
        let a = lemma_inputs(&cfg).unwrap();
        let b = lemma_inputs(&cfg).unwrap();
        assert_eq!(a, b);
        let other = RunConfig::parse("grid.n1 = 16\ngrid.n2 = 16\nmetric.kind = random\nrun.seed = 2").unwrap();
        assert_ne!(lemma_inputs(&other).unwrap().0, a.0);
        let f_grad = grad_norm_sq(&a.2, &a.0).unwrap().max();
        assert!((f_grad - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let xs: Vec<f64> = [0.1f64, 0.05, 0.025].iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = [0.1f64, 0.05, 0.025].iter().map(|h| (3.0 * h.powi(4)).ln()).collect();
        assert!((fit_slope(&xs, &ys) - 4.0).abs() < 1e-12);
    }
}
