//! The `psf` binary end to end: exit codes, outputs and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn psf(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psf"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--output")
        .arg(out)
        .env_remove("PSF_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().parse::<f64>().unwrap()))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{text}"))
}

const SMALL_HOMOTHETY: &str = "grid.n1 = 16\ngrid.n2 = 16\nmetric.kind = sin_sin\nflow.kind = homothety\nrun.p = 3\nrun.alpha = 0.4\nrun.t_end = 0.05\nrun.dt = 0.01\nrun.checks = identity, metric_bounds\n";

#[test]
fn flat_eigenvalue() {
    let sb = Sandbox::new();
    let cfg = sb.config("flat.cfg", "grid.n1 = 64\ngrid.n2 = 64\nrun.p = 2\n");
    let o = psf(&["eigen"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lambda = value(&stdout(&o), "lambda ");
    assert!((lambda - 4.0 * std::f64::consts::PI.powi(2)).abs() < 4e-2, "{lambda}");
    assert!(sb.out("o").join("resolved_config.txt").exists());
}

#[test]
fn perelman_mode_on_flat_torus() {
    let sb = Sandbox::new();
    let cfg = sb.config("p.cfg", "grid.n1 = 16\ngrid.n2 = 16\neigen.mode = perelman\n");
    let o = psf(&["eigen"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(value(&stdout(&o), "lambda_perelman ").abs() < 1e-10);
}

#[test]
fn invalid_p_is_a_configuration_error() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.cfg", "run.p = 0.5\n");
    let o = psf(&["eigen"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.p"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected() {
    let sb = Sandbox::new();
    let cfg = sb.config("bad.cfg", "grid.n3 = 4\n");
    let o = psf(&["eigen"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.n3"), "{}", stderr(&o));
}

#[test]
fn alpha_outside_range_warns_but_runs() {
    let sb = Sandbox::new();
    let cfg = sb.config("a.cfg", "grid.n1 = 16\ngrid.n2 = 16\nrun.p = 3\nrun.alpha = 0.6\n");
    let o = psf(&["eigen"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    let resolved = std::fs::read_to_string(sb.out("o").join("resolved_config.txt")).unwrap();
    assert!(resolved.contains("# warning:"));
}

#[test]
fn ricci_step_above_stability_bound_fails() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "r.cfg",
        "grid.n1 = 64\ngrid.n2 = 64\nmetric.kind = sin_sin\nflow.kind = ricci\nrun.t_end = 0.01\nrun.dt = 0.001\n",
    );
    let o = psf(&["run"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stability bound"), "{}", stderr(&o));
}

#[test]
fn homothety_run_writes_outputs_and_is_deterministic() {
    let sb = Sandbox::new();
    let cfg = sb.config("h.cfg", &format!("{SMALL_HOMOTHETY}run.snapshot_every = 2\n"));
    let a = psf(&["run", "--dump-eigenfunction"], &cfg, &sb.out("a"));
    assert_eq!(a.status.code(), Some(0), "{}\n{}", stdout(&a), stderr(&a));
    assert_eq!(value(&stdout(&a), "samples "), 6.0);
    for f in ["trace.csv", "trace_extra.csv", "report.csv", "resolved_config.txt", "eigenfunction.csv", "snap_0.csv", "snap_2.csv", "snap_4.csv"] {
        assert!(sb.out("a").join(f).exists(), "missing {f}");
    }
    let trace = std::fs::read_to_string(sb.out("a").join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 7);
    assert!(trace.starts_with("t,lambda,H_min,H_max,vol,q_p2,q_p,pinch_min,beta_min,eig_residual,eig_iters"));

    let b = psf(&["run"], &cfg, &sb.out("b"));
    assert_eq!(b.status.code(), Some(0));
    for f in ["trace.csv", "trace_extra.csv", "report.csv"] {
        let x = std::fs::read(sb.out("a").join(f)).unwrap();
        let y = std::fs::read(sb.out("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
}

#[test]
fn resolved_config_reproduces_the_run() {
    let sb = Sandbox::new();
    let cfg = sb.config("h.cfg", SMALL_HOMOTHETY);
    assert_eq!(psf(&["run"], &cfg, &sb.out("a")).status.code(), Some(0));
    let resolved = sb.out("a").join("resolved_config.txt");
    assert_eq!(psf(&["run"], &resolved, &sb.out("b")).status.code(), Some(0));
    assert_eq!(
        std::fs::read(sb.out("a").join("trace.csv")).unwrap(),
        std::fs::read(sb.out("b").join("trace.csv")).unwrap()
    );
}

#[test]
fn seed_flag_changes_random_metrics() {
    let sb = Sandbox::new();
    let cfg = sb.config("r.cfg", "grid.n1 = 16\ngrid.n2 = 16\nmetric.kind = random\nrun.p = 2\n");
    let a = psf(&["eigen", "--seed", "1"], &cfg, &sb.out("a"));
    let b = psf(&["eigen", "--seed", "1"], &cfg, &sb.out("b"));
    let c = psf(&["eigen", "--seed", "2"], &cfg, &sb.out("c"));
    assert_eq!(stdout(&a), stdout(&b));
    assert_ne!(value(&stdout(&a), "lambda "), value(&stdout(&c), "lambda "));
}

#[test]
fn convergence_study_and_level_validation() {
    let sb = Sandbox::new();
    let cfg = sb.config("c.cfg", "run.p = 2\nconvergence.levels = 16, 32, 64\n");
    let o = psf(&["convergence"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(value(&stdout(&o), "observed order ") >= 1.9);
    let table = std::fs::read_to_string(sb.out("o").join("convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);

    let cfg = sb.config("same.cfg", "run.p = 2\nconvergence.levels = 32, 32, 32\n");
    assert_eq!(psf(&["convergence"], &cfg, &sb.out("x")).status.code(), Some(2));
}

#[test]
fn verify_lemmas_passes() {
    let sb = Sandbox::new();
    let cfg = sb.config("l.cfg", "grid.n1 = 64\ngrid.n2 = 64\nmetric.kind = random\nrun.p = 3\nrun.alpha = 0.4\n");
    let o = psf(&["verify-lemmas"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    assert!(sb.out("o").join("lemmas.csv").exists());
}

#[test]
fn malformed_thread_cap_is_rejected() {
    let sb = Sandbox::new();
    let cfg = sb.config("f.cfg", "grid.n1 = 16\ngrid.n2 = 16\n");
    let o = Command::new(env!("CARGO_BIN_EXE_psf"))
        .args(["eigen", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(sb.out("o"))
        .env("PSF_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("PSF_THREADS"));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let sb = Sandbox::new();
    let cfg = sb.config("p.cfg", "# header\ngrid.n1 = 16\nthis is not a pair\n");
    let o = psf(&["eigen"], &cfg, &sb.out("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}
