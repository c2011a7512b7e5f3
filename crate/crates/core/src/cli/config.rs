//! Flat `section.key = value` configuration.
//!
//! Blank lines and `#` comments are ignored; every key must appear in the
//! schema below and at most once. Missing keys take their defaults, and the
//! fully resolved set is rendered back by [`RunConfig::resolved_text`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use crate::eigen::{Algorithm, EigenConfig};
use crate::error::{Error, Result};
use crate::harness::{alpha_range_warnings, CHECK_NAMES};
use crate::manifold::GridSpec;

/// Every accepted key with its default.
const SCHEMA: &[(&str, &str)] = &[
    ("grid.n1", "64"),
    ("grid.n2", "64"),
    ("grid.l1", "1"),
    ("grid.l2", "1"),
    ("metric.kind", "flat"),
    ("metric.amplitude", "0.1"),
    ("metric.max_mode", "2"),
    ("metric.scale", "1"),
    ("flow.kind", "homothety"),
    ("flow.c0", "0.1"),
    ("flow.cfl", "0.2"),
    ("flow.h_amplitude", "0.1"),
    ("flow.h_max_mode", "2"),
    ("run.p", "2"),
    ("run.alpha", "0.5"),
    ("run.t_end", "0.1"),
    ("run.dt", "0.001"),
    ("run.eigen_every", "1"),
    ("run.snapshot_every", "0"),
    ("run.cold_every", "0"),
    ("run.substep", "false"),
    ("run.beta_probe", "0.0001"),
    ("run.checks", "identity"),
    ("run.seed", "1"),
    ("eigen.mode", "p_laplacian"),
    ("eigen.algorithm", "projected_gradient"),
    ("eigen.tol_lambda", "1e-11"),
    ("eigen.tol_residual", "1e-6"),
    ("eigen.max_iter", "20000"),
    ("eigen.step0", "0.5"),
    ("eigen.eps", "auto"),
    ("eigen.seed", "42"),
    ("eigen.starts", "4"),
    ("eigen.continuation_step", "0.25"),
    ("convergence.levels", "16,32,64"),
    ("convergence.min_order", "1.9"),
    ("lemmas.dt_probe", "0.0001"),
    ("lemmas.tol", "0.0001"),
    ("lemmas.max_mode", "2"),
    ("lemmas.normalize", "true"),
    ("output.dir", "out"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Flat,
    /// `u = a sin(2 pi x / L1) sin(2 pi y / L2)`.
    SinSin,
    /// Seeded band-limited `u`.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub amplitude: f64,
    pub max_mode: usize,
    /// Constant factor `s` in `g = s e^{2u} delta`.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowChoice {
    Homothety,
    Calibrated,
    Ricci,
    Yamabe,
    /// Time-independent seeded band-limited `h`.
    FixedRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowDescriptor {
    pub kind: FlowChoice,
    pub c0: f64,
    pub cfl: f64,
    pub h_amplitude: f64,
    pub h_max_mode: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMode {
    PLaplacian,
    /// First eigenvalue of `-4 Delta + R`.
    Perelman,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSettings {
    pub dt_probe: f64,
    pub tol: f64,
    pub max_mode: usize,
    /// Rescale the random `f` and `h` to unit size before probing.
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub metric: MetricSpec,
    pub flow: FlowDescriptor,
    pub p: f64,
    pub alpha: f64,
    pub t_end: f64,
    pub dt: f64,
    pub eigen_every: usize,
    pub snapshot_every: usize,
    pub cold_every: usize,
    pub substep: bool,
    pub beta_probe: f64,
    pub checks: Vec<String>,
    pub seed: u64,
    pub eigen: EigenConfig,
    pub mode: EigenMode,
    pub levels: Vec<usize>,
    pub min_order: f64,
    pub lemmas: LemmaSettings,
    pub output_dir: PathBuf,
    /// Non-fatal notes, e.g. `alpha` outside a theorem's range.
    pub warnings: Vec<String>,
    resolved: BTreeMap<&'static str, String>,
}

struct Reader {
    values: BTreeMap<&'static str, String>,
}

impl Reader {
    fn text(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self
            .text(key)
            .parse()
            .map_err(|_| Error::validation(key, format!("expected a number, got `{}`", self.text(key))))?;
        if !v.is_finite() {
            return Err(Error::validation(key, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::validation(key, "must be > 0"))
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.text(key)
            .parse()
            .map_err(|_| Error::validation(key, format!("expected a non-negative integer, got `{}`", self.text(key))))
    }

    fn u64(&self, key: &str) -> Result<u64> {
        self.text(key)
            .parse()
            .map_err(|_| Error::validation(key, format!("expected a non-negative integer, got `{}`", self.text(key))))
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.text(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::validation(key, format!("expected true or false, got `{other}`"))),
        }
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.text(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    }
}

fn schema_key(key: &str) -> Option<&'static str> {
    SCHEMA.iter().find(|(k, _)| *k == key).map(|(k, _)| *k)
}

/// Splits the text into `key -> (line, value)` without interpreting values.
fn parse_lines(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected `section.key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let well_formed = key.split_once('.').is_some_and(|(s, k)| {
            let ok = |part: &str| {
                !part.is_empty() && part.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            };
            ok(s) && ok(k)
        });
        if !well_formed {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("malformed key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("missing value for `{key}`"),
            });
        }
        if out.insert(key.to_string(), (line_no, value.to_string())).is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[])
    }

    /// Like [`RunConfig::parse`], with `overrides` applied on top of the text
    /// (used for command-line flags).
    pub fn parse_with(text: &str, overrides: &[(&str, String)]) -> Result<Self> {
        let given = parse_lines(text)?;
        let mut values: BTreeMap<&'static str, String> =
            SCHEMA.iter().map(|(k, d)| (*k, d.to_string())).collect();
        for (key, (_, value)) in given {
            let k = schema_key(&key).ok_or_else(|| Error::validation(&key, "unknown key"))?;
            values.insert(k, value);
        }
        for (key, value) in overrides {
            let k = schema_key(key).ok_or_else(|| Error::validation(key, "unknown key"))?;
            values.insert(k, value.clone());
        }
        Self::from_values(Reader { values })
    }

    fn from_values(r: Reader) -> Result<Self> {
        let n1 = r.usize("grid.n1")?;
        let n2 = r.usize("grid.n2")?;
        let grid = GridSpec::new(n1, n2, r.positive("grid.l1")?, r.positive("grid.l2")?)
            .map_err(|e| Error::validation("grid", e.to_string()))?;

        let metric = MetricSpec {
            kind: match r.text("metric.kind") {
                "flat" => MetricKind::Flat,
                "sin_sin" => MetricKind::SinSin,
                "random" => MetricKind::Random,
                other => return Err(Error::validation("metric.kind", format!("unknown metric `{other}` (flat, sin_sin, random)"))),
            },
            amplitude: r.f64("metric.amplitude")?,
            max_mode: r.usize("metric.max_mode")?,
            scale: r.positive("metric.scale")?,
        };

        let flow = FlowDescriptor {
            kind: match r.text("flow.kind") {
                "homothety" => FlowChoice::Homothety,
                "calibrated" => FlowChoice::Calibrated,
                "ricci" => FlowChoice::Ricci,
                "yamabe" => FlowChoice::Yamabe,
                "fixed_random" => FlowChoice::FixedRandom,
                other => {
                    return Err(Error::validation(
                        "flow.kind",
                        format!("unknown flow `{other}` (homothety, calibrated, ricci, yamabe, fixed_random)"),
                    ))
                }
            },
            c0: r.f64("flow.c0")?,
            cfl: r.positive("flow.cfl")?,
            h_amplitude: r.f64("flow.h_amplitude")?,
            h_max_mode: r.usize("flow.h_max_mode")?,
        };

        let p = r.f64("run.p")?;
        if !(p >= 1.0) {
            return Err(Error::validation("run.p", "must be >= 1"));
        }
        let alpha = r.f64("run.alpha")?;
        let t_end = r.f64("run.t_end")?;
        if !(t_end >= 0.0) {
            return Err(Error::validation("run.t_end", "must be >= 0"));
        }
        let dt = r.positive("run.dt")?;
        let eigen_every = r.usize("run.eigen_every")?;
        if eigen_every == 0 {
            return Err(Error::validation("run.eigen_every", "must be >= 1"));
        }
        let checks = r.list("run.checks");
        for c in &checks {
            if !CHECK_NAMES.contains(&c.as_str()) {
                return Err(Error::validation(
                    "run.checks",
                    format!("unknown check `{c}` (known: {})", CHECK_NAMES.join(", ")),
                ));
            }
        }
        if flow.kind == FlowChoice::Calibrated && t_end >= 1.0 / (2.0 * flow.c0) && flow.c0 > 0.0 {
            return Err(Error::validation("run.t_end", "must stay below the pole 1/(2 c0)"));
        }

        let mode = match r.text("eigen.mode") {
            "p_laplacian" => EigenMode::PLaplacian,
            "perelman" => EigenMode::Perelman,
            other => return Err(Error::validation("eigen.mode", format!("unknown mode `{other}` (p_laplacian, perelman)"))),
        };
        let algorithm = match r.text("eigen.algorithm") {
            "projected_gradient" => Algorithm::ProjectedGradient,
            "inverse_iteration" => Algorithm::InverseIteration,
            other => {
                return Err(Error::validation(
                    "eigen.algorithm",
                    format!("unknown algorithm `{other}` (projected_gradient, inverse_iteration)"),
                ))
            }
        };
        if algorithm == Algorithm::InverseIteration && p != 2.0 {
            return Err(Error::validation("eigen.algorithm", "inverse_iteration requires p = 2"));
        }
        let eps = match r.text("eigen.eps") {
            "auto" => None,
            _ => Some(r.f64("eigen.eps")?),
        };
        let eigen = EigenConfig {
            tol_lambda: r.f64("eigen.tol_lambda")?,
            tol_residual: r.f64("eigen.tol_residual")?,
            max_iter: r.usize("eigen.max_iter")?,
            step0: r.f64("eigen.step0")?,
            eps,
            seed: r.u64("eigen.seed")?,
            algorithm,
            starts: r.usize("eigen.starts")?,
            continuation_step: r.f64("eigen.continuation_step")?,
        };
        eigen.validate()?;

        let mut levels = Vec::new();
        for item in r.list("convergence.levels") {
            levels.push(
                item.parse::<usize>()
                    .map_err(|_| Error::validation("convergence.levels", format!("bad level `{item}`")))?,
            );
        }
        if levels.len() < 3 {
            return Err(Error::validation("convergence.levels", "need at least 3 levels"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("convergence.levels", "levels must be strictly increasing"));
        }

        let lemmas = LemmaSettings {
            dt_probe: r.positive("lemmas.dt_probe")?,
            tol: r.positive("lemmas.tol")?,
            max_mode: r.usize("lemmas.max_mode")?,
            normalize: r.bool("lemmas.normalize")?,
        };

        let cfg = Self {
            grid,
            metric,
            flow,
            p,
            alpha,
            t_end,
            dt,
            eigen_every,
            snapshot_every: r.usize("run.snapshot_every")?,
            cold_every: r.usize("run.cold_every")?,
            substep: r.bool("run.substep")?,
            beta_probe: r.positive("run.beta_probe")?,
            checks,
            seed: r.u64("run.seed")?,
            eigen,
            mode,
            levels,
            min_order: r.f64("convergence.min_order")?,
            lemmas,
            output_dir: PathBuf::from(r.text("output.dir")),
            warnings: alpha_range_warnings(alpha, p, 2),
            resolved: r.values,
        };
        cfg.spec_checks()?;
        Ok(cfg)
    }

    /// Cross-module preconditions re-checked at parse time.
    fn spec_checks(&self) -> Result<()> {
        let spec = super::flow_spec(self)?;
        spec.validate()
    }

    /// Every key with its effective value, sorted, one per line.
    pub fn resolved_text(&self) -> String {
        let mut s = String::from("# resolved configuration\n");
        for w in &self.warnings {
            s.push_str(&format!("# warning: {w}\n"));
        }
        let mut section = "";
        for (k, v) in &self.resolved {
            let sec = k.split('.').next().unwrap_or("");
            if sec != section {
                s.push('\n');
                section = sec;
            }
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    /// Keys that the parser recognizes.
    pub fn known_keys() -> BTreeSet<&'static str> {
        SCHEMA.iter().map(|(k, _)| *k).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# homothety scenario
grid.n1 = 64
grid.n2 = 64
flow.kind = homothety
flow.c0 = 0.1
run.p = 3
run.t_end = 0.5
run.dt = 1e-3
";

    #[test]
    fn minimal_config_resolves_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid.n1(), 64);
        assert_eq!(cfg.flow.kind, FlowChoice::Homothety);
        assert_eq!(cfg.p, 3.0);
        assert_eq!(cfg.eigen.tol_residual, 1e-6);
        let text = cfg.resolved_text();
        for key in RunConfig::known_keys() {
            assert!(text.contains(&format!("\n{key} = ")), "{key}");
        }
        // the echo parses back to the same configuration
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn p_below_one_is_rejected() {
        let err = RunConfig::parse("run.p = 0.5").unwrap_err();
        assert!(matches!(err, Error::Validation { ref key, ref reason } if key == "run.p" && reason == "must be >= 1"));
    }

    #[test]
    fn alpha_outside_range_warns() {
        let cfg = RunConfig::parse("run.p = 3\nrun.alpha = 0.6").unwrap();
        assert!(!cfg.warnings.is_empty());
        assert!(cfg.resolved_text().contains("# warning:"));
    }

    #[test]
    fn malformed_input_reports_line() {
        assert!(matches!(RunConfig::parse("grid.n1 = 8\nnonsense"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(RunConfig::parse("grid.n1 = 8\ngrid.n1 = 9"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(RunConfig::parse("Grid.N1 = 8"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(RunConfig::parse("grid.n1 ="), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn unknown_keys_and_values_are_rejected() {
        assert!(matches!(RunConfig::parse("grid.nx = 8"), Err(Error::Validation { ref key, .. }) if key == "grid.nx"));
        assert!(RunConfig::parse("flow.kind = mean_curvature").is_err());
        assert!(RunConfig::parse("run.checks = identity, bogus").is_err());
        assert!(RunConfig::parse("convergence.levels = 16,16,32").is_err());
        assert!(RunConfig::parse("convergence.levels = 16,32").is_err());
        assert!(RunConfig::parse("eigen.algorithm = inverse_iteration\nrun.p = 3").is_err());
        assert!(RunConfig::parse("run.substep = yes").is_err());
    }

    #[test]
    fn overrides_apply_after_text() {
        let cfg = RunConfig::parse_with("run.seed = 4", &[("run.seed", "9".into())]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(RunConfig::parse_with("", &[("bogus.key", "1".into())]).is_err());
    }

    #[test]
    fn calibrated_horizon_must_precede_pole() {
        assert!(RunConfig::parse("flow.kind = calibrated\nflow.c0 = 0.5\nrun.t_end = 1.0").is_err());
        assert!(RunConfig::parse("flow.kind = calibrated\nflow.c0 = 0.5\nrun.t_end = 0.8").is_ok());
    }
}
