use std::io::Write;

use crate::error::Result;
use crate::manifold::snapshot::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// The check could not be asserted (a hypothesis was not met).
    Skipped,
}

impl Outcome {
    fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "true",
            Outcome::Fail => "false",
            Outcome::Skipped => "skipped",
        }
    }
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub location_t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub outcome: Outcome,
}

fn rel(abs: f64, rhs: f64) -> f64 {
    if rhs != 0.0 {
        abs / rhs.abs()
    } else {
        abs
    }
}

impl CheckRow {
    /// `|lhs - rhs| <= tol`.
    pub fn equality(check: &str, t: f64, lhs: f64, rhs: f64, tol: f64) -> Self {
        let abs_err = (lhs - rhs).abs();
        Self {
            check: check.to_string(),
            location_t: t,
            lhs,
            rhs,
            abs_err,
            rel_err: rel(abs_err, rhs),
            outcome: if abs_err <= tol { Outcome::Pass } else { Outcome::Fail },
        }
    }

    /// `lhs >= rhs - tol`; `abs_err` records the signed slack `lhs - rhs`.
    pub fn lower_bound(check: &str, t: f64, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            check: check.to_string(),
            location_t: t,
            lhs,
            rhs,
            abs_err: slack,
            rel_err: rel(slack, rhs),
            outcome: if slack >= -tol { Outcome::Pass } else { Outcome::Fail },
        }
    }

    /// A check that could not be asserted; `reason` is folded into the name.
    pub fn skipped(check: &str, t: f64, reason: &str) -> Self {
        Self {
            check: format!("{check}[unverified: {reason}]"),
            location_t: t,
            lhs: f64::NAN,
            rhs: f64::NAN,
            abs_err: f64::NAN,
            rel_err: f64::NAN,
            outcome: Outcome::Skipped,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    rows: Vec<CheckRow>,
}

impl Report {
    pub fn push(&mut self, row: CheckRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
    }

    pub fn rows(&self) -> &[CheckRow] {
        &self.rows
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| r.outcome == Outcome::Fail)
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    /// Rows whose check name starts with `prefix`.
    pub fn select<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a CheckRow> + 'a {
        self.rows.iter().filter(move |r| r.check.starts_with(prefix))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "check,location_t,lhs,rhs,abs_err,rel_err,pass")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.check.replace(',', ";"),
                fmt_f64(r.location_t),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                fmt_f64(r.abs_err),
                fmt_f64(r.rel_err),
                r.outcome.as_str()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_csv() {
        let mut r = Report::default();
        r.push(CheckRow::equality("a", 0.0, 1.0, 1.0 + 1e-9, 1e-8));
        r.push(CheckRow::lower_bound("b", 0.5, 1.0, 2.0, 0.1));
        r.push(CheckRow::skipped("c", 1.0, "beta"));
        assert_eq!(r.rows()[0].outcome, Outcome::Pass);
        assert_eq!(r.rows()[1].outcome, Outcome::Fail);
        assert!(!r.all_pass());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "check,location_t,lhs,rhs,abs_err,rel_err,pass");
        assert!(lines[2].ends_with(",false"));
        assert!(lines[3].starts_with("c[unverified: beta]") && lines[3].ends_with(",skipped"));
    }
}
