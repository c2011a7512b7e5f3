//! Plain-text field snapshots.
//!
//! ```text
//! # grid n1 n2 L1 L2
//! i,j,value              (scalar)
//! i,j,T11,T12,T22        (tensor)
//! ```

use std::io::Write;

use super::{GridSpec, ScalarField, SymTensorField};
use crate::error::{Error, Result};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(grid: &GridSpec) -> String {
    format!("# grid {} {} {} {}\n", grid.n1(), grid.n2(), grid.l1(), grid.l2())
}

pub fn write_scalar<W: Write>(out: &mut W, f: &ScalarField) -> Result<()> {
    let grid = f.grid();
    out.write_all(header(grid).as_bytes())?;
    for i in 0..grid.n1() {
        for j in 0..grid.n2() {
            writeln!(out, "{i},{j},{}", fmt_f64(f.get(i, j)))?;
        }
    }
    Ok(())
}

pub fn write_tensor<W: Write>(out: &mut W, t: &SymTensorField) -> Result<()> {
    let grid = t.grid();
    out.write_all(header(grid).as_bytes())?;
    for i in 0..grid.n1() {
        for j in 0..grid.n2() {
            let [a, b, c] = t.at(grid.idx(i, j));
            writeln!(out, "{i},{j},{},{},{}", fmt_f64(a), fmt_f64(b), fmt_f64(c))?;
        }
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<GridSpec> {
    let bad = |msg: &str| Error::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    let rest = line
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|s| s.strip_prefix("grid"))
        .ok_or_else(|| bad("expected `# grid n1 n2 L1 L2` header"))?;
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(bad("header needs n1 n2 L1 L2"));
    }
    let n1 = parts[0].parse().map_err(|_| bad("bad n1"))?;
    let n2 = parts[1].parse().map_err(|_| bad("bad n2"))?;
    let l1 = parts[2].parse().map_err(|_| bad("bad L1"))?;
    let l2 = parts[3].parse().map_err(|_| bad("bad L2"))?;
    GridSpec::new(n1, n2, l1, l2)
}

/// Parses rows of `width` values; every grid point must appear exactly once.
fn read_rows(text: &str, width: usize, expect: Option<&GridSpec>) -> Result<(GridSpec, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let grid = parse_header(lines.next().unwrap_or(""))?;
    if let Some(e) = expect {
        if e != &grid {
            return Err(Error::GridMismatch);
        }
    }
    let mut cols = vec![vec![0.0; grid.len()]; width];
    let mut seen = vec![false; grid.len()];
    let mut count = 0;
    for (ln, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: ln + 2, msg };
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != width + 2 {
            return Err(bad(format!("expected {} columns, got {}", width + 2, parts.len())));
        }
        let i: usize = parts[0].parse().map_err(|_| bad("bad index i".into()))?;
        let j: usize = parts[1].parse().map_err(|_| bad("bad index j".into()))?;
        if i >= grid.n1() || j >= grid.n2() {
            return Err(bad(format!("point ({i}, {j}) outside {}x{} grid", grid.n1(), grid.n2())));
        }
        let k = grid.idx(i, j);
        if seen[k] {
            return Err(bad(format!("duplicate point ({i}, {j})")));
        }
        seen[k] = true;
        count += 1;
        for (c, col) in cols.iter_mut().enumerate() {
            col[k] = parts[c + 2]
                .parse()
                .map_err(|_| bad(format!("bad value in column {}", c + 3)))?;
        }
    }
    if count != grid.len() {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {} points, found {count}", grid.len()),
        });
    }
    Ok((grid, cols))
}

/// Reads a scalar snapshot; when `expect` is given the header must match it.
pub fn read_scalar(text: &str, expect: Option<&GridSpec>) -> Result<ScalarField> {
    let (grid, mut cols) = read_rows(text, 1, expect)?;
    ScalarField::new(grid, cols.remove(0))
}

pub fn read_tensor(text: &str, expect: Option<&GridSpec>) -> Result<SymTensorField> {
    let (grid, mut cols) = read_rows(text, 3, expect)?;
    let c = cols.pop().unwrap();
    let b = cols.pop().unwrap();
    let a = cols.pop().unwrap();
    SymTensorField::new(grid, a, b, c)
}
