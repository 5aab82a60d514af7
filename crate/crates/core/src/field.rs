//! Uniform rectangular grids and real-valued fields sampled on their nodes.
//!
//! Every density, charge and potential in the crate lives on a [`Grid`]
//! covering `[-a, a] x [-b, b]`. Values are stored row-major with the
//! `x` index outermost, so node `(i, j)` sits at `values[i * nb + j]`.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    na: usize,
    nb: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, na: usize, nb: usize) -> Result<Self> {
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-widths must be positive and finite (a = {a}, b = {b})"
            )));
        }
        if na < 3 || nb < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis (Na = {na}, Nb = {nb})"
            )));
        }
        Ok(Self {
            a,
            b,
            na,
            nb,
            hx: 2.0 * a / (na - 1) as f64,
            hy: 2.0 * b / (nb - 1) as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn len(&self) -> usize {
        self.na * self.nb
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        4.0 * self.a * self.b
    }

    /// `x` coordinate of column `i`. Computed symmetrically so that the grid is
    /// exactly mirror-symmetric and the centre node of an odd grid is exactly 0.
    pub fn x(&self, i: usize) -> f64 {
        let n = (self.na - 1) as f64;
        self.a * (2.0 * i as f64 - n) / n
    }

    pub fn y(&self, j: usize) -> f64 {
        let n = (self.nb - 1) as f64;
        self.b * (2.0 * j as f64 - n) / n
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x(i), self.y(j))
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nb + j
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / self.nb, k % self.nb)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.na - 1 || j == self.nb - 1
    }

    /// Trapezoid weight of node `(i, j)`: `hx * hy` times 1 inside, 1/2 on
    /// edges and 1/4 on corners.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.na - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.nb - 1 { 0.5 } else { 1.0 };
        wx * wy * self.hx * self.hy
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.coords(k);
                self.weight(i, j)
            })
            .collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.coords(k);
                f(grid.x(i), grid.y(j))
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + s * b)
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid integral of the pointwise product.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        Ok(weighted_dot(&self.grid, &self.values, &other.values))
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;

    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;

    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;

    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(rhs)
    }
}

pub(crate) fn weighted_dot(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    let (na, nb) = (grid.na(), grid.nb());
    let mut total = 0.0;
    for i in 0..na {
        let wx = if i == 0 || i == na - 1 { 0.5 } else { 1.0 };
        let row = i * nb;
        let mut s = 0.5 * (u[row] * v[row] + u[row + nb - 1] * v[row + nb - 1]);
        for j in 1..nb - 1 {
            s += u[row + j] * v[row + j];
        }
        total += wx * s;
    }
    total * grid.cell_area()
}

/// Two-dimensional trapezoid rule.
pub fn integrate(f: &ScalarField) -> f64 {
    let grid = f.grid();
    let (na, nb) = (grid.na(), grid.nb());
    let v = f.values();
    let mut total = 0.0;
    for i in 0..na {
        let wx = if i == 0 || i == na - 1 { 0.5 } else { 1.0 };
        let row = i * nb;
        let mut s = 0.5 * (v[row] + v[row + nb - 1]);
        for j in 1..nb - 1 {
            s += v[row + j];
        }
        total += wx * s;
    }
    total * grid.cell_area()
}

pub fn lp_norm(f: &ScalarField, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidConfig(format!("Lp exponent must be >= 1, got {p}")));
    }
    Ok(integrate(&f.map(|v| v.abs().powf(p))).powf(1.0 / p))
}

/// Five-point Laplacian on interior nodes. Boundary nodes are set to zero and
/// carry no meaning; use [`interior_l2`] for residual norms.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = *f.grid();
    let (na, nb) = (grid.na(), grid.nb());
    let (ihx2, ihy2) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let v = f.values();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(nb).enumerate().for_each(|(i, row)| {
        if i == 0 || i == na - 1 {
            return;
        }
        #[allow(clippy::needless_range_loop)]
        for j in 1..nb - 1 {
            let k = i * nb + j;
            row[j] = (v[k + nb] - 2.0 * v[k] + v[k - nb]) * ihx2
                + (v[k + 1] - 2.0 * v[k] + v[k - 1]) * ihy2;
        }
    });
    ScalarField::from_vec_unchecked(grid, out)
}

/// Central differences inside, first-order one-sided differences on the
/// boundary ring.
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let grid = *f.grid();
    let (na, nb) = (grid.na(), grid.nb());
    let (hx, hy) = (grid.hx(), grid.hy());
    let v = f.values();
    let mut gx = vec![0.0; grid.len()];
    let mut gy = vec![0.0; grid.len()];
    for i in 0..na {
        for j in 0..nb {
            let k = grid.index(i, j);
            gx[k] = if i == 0 {
                (v[k + nb] - v[k]) / hx
            } else if i == na - 1 {
                (v[k] - v[k - nb]) / hx
            } else {
                (v[k + nb] - v[k - nb]) / (2.0 * hx)
            };
            gy[k] = if j == 0 {
                (v[k + 1] - v[k]) / hy
            } else if j == nb - 1 {
                (v[k] - v[k - 1]) / hy
            } else {
                (v[k + 1] - v[k - 1]) / (2.0 * hy)
            };
        }
    }
    (
        ScalarField::from_vec_unchecked(grid, gx),
        ScalarField::from_vec_unchecked(grid, gy),
    )
}

/// Discrete L2 norm over interior nodes only (`hx * hy * sum f^2`, boundary
/// ring excluded).
pub fn interior_l2(f: &ScalarField) -> f64 {
    masked_l2(f, |i, j| !f.grid().is_boundary(i, j))
}

/// Discrete L2 norm over the nodes selected by `mask`.
pub fn masked_l2(f: &ScalarField, mask: impl Fn(usize, usize) -> bool) -> f64 {
    let grid = f.grid();
    let mut s = 0.0;
    for i in 0..grid.na() {
        for j in 0..grid.nb() {
            if mask(i, j) {
                let v = f.get(i, j);
                s += v * v;
            }
        }
    }
    (s * grid.cell_area()).sqrt()
}

/// Nonnegative field with its total charge `Z = integrate(field)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeDistribution {
    field: ScalarField,
    charge: f64,
}

impl ChargeDistribution {
    pub fn new(field: ScalarField) -> Result<Self> {
        if let Some((k, &v)) = field.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::Negative { node: k, value: v });
        }
        let charge = integrate(&field);
        if !(charge.is_finite() && charge > 0.0) {
            return Err(Error::InvalidCharge(format!(
                "total charge must be positive and finite, got {charge}"
            )));
        }
        Ok(Self { field, charge })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }
}
