//! Plain-text persistence: node fields, SCF histories and eigenvalue tables.
//!
//! Every float is written with 17 significant digits, so a write/read cycle
//! reproduces `f64` values bit for bit.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

/// One SCF step: iteration index, energy, Fermi level and mixing parameter.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub energy: f64,
    pub lambda: f64,
    pub t: f64,
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `x,y,value` rows, x index outer.
pub fn write_field<W: Write>(mut out: W, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    writeln!(out, "x,y,value")?;
    for (k, &v) in field.values().iter().enumerate() {
        let (i, j) = grid.coords(k);
        writeln!(out, "{},{},{}", sci(grid.x(i)), sci(grid.y(j)), sci(v))?;
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Csv(format!("line {line}: cannot parse `{}` as a number", s.trim())))
}

/// Reads a field written by [`write_field`], reconstructing its grid from the
/// node coordinates.
pub fn read_field<R: BufRead>(input: R) -> Result<ScalarField> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))??;
    if header.trim() != "x,y,value" {
        return Err(Error::Csv(format!("unexpected header `{}`", header.trim())));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Csv(format!("line {}: expected 3 columns", n + 2)));
        }
        rows.push([parse_f64(cols[0], n + 2)?, parse_f64(cols[1], n + 2)?, parse_f64(cols[2], n + 2)?]);
    }
    if rows.len() < 4 {
        return Err(Error::Csv("too few rows for a grid".into()));
    }
    let x0 = rows[0][0];
    let nb = rows.iter().take_while(|r| r[0] == x0).count();
    if rows.len() % nb != 0 {
        return Err(Error::Csv("row count is not a multiple of the column length".into()));
    }
    let na = rows.len() / nb;
    let grid = Grid::new(-x0, -rows[0][1], na, nb)?;
    let tol = 1e-9 * grid.a().max(grid.b());
    for (k, r) in rows.iter().enumerate() {
        let (x, y) = grid.node(grid.coords(k).0, grid.coords(k).1);
        if (r[0] - x).abs() > tol || (r[1] - y).abs() > tol {
            return Err(Error::Csv(format!("line {}: node is not on a uniform grid", k + 2)));
        }
    }
    ScalarField::new(grid, rows.into_iter().map(|r| r[2]).collect())
}

pub fn write_history<W: Write>(mut out: W, history: &[HistoryEntry]) -> Result<()> {
    writeln!(out, "iter,energy,lambda,t")?;
    for h in history {
        writeln!(out, "{},{},{},{}", h.iter, sci(h.energy), sci(h.lambda), sci(h.t))?;
    }
    Ok(())
}

pub fn read_history<R: BufRead>(input: R) -> Result<Vec<HistoryEntry>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))??;
    if header.trim() != "iter,energy,lambda,t" {
        return Err(Error::Csv(format!("unexpected header `{}`", header.trim())));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Csv(format!("line {}: expected 4 columns", n + 2)));
        }
        let iter = cols[0]
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("line {}: bad iteration index", n + 2)))?;
        out.push(HistoryEntry {
            iter,
            energy: parse_f64(cols[1], n + 2)?,
            lambda: parse_f64(cols[2], n + 2)?,
            t: parse_f64(cols[3], n + 2)?,
        });
    }
    Ok(out)
}

/// Writes `j,E_j,g_j` rows.
pub fn write_eigen_table<W: Write>(mut out: W, energies: &[f64], weights: &[f64]) -> Result<()> {
    if energies.len() != weights.len() {
        return Err(Error::ShapeMismatch { expected: energies.len(), found: weights.len() });
    }
    writeln!(out, "j,E_j,g_j")?;
    for (j, (e, g)) in energies.iter().zip(weights).enumerate() {
        writeln!(out, "{j},{},{}", sci(*e), sci(*g))?;
    }
    Ok(())
}
