//! Two-dimensional Coulomb interaction on a grid.
//!
//! Two interactions are provided:
//!
//! * the regularized one, built from the Riesz potential
//!   `W_f(x) = (1/2pi) int f(y)/|x-y| dy` and the modified Riesz potentials
//!   `I1` (sources in the unit disk) and `I2` (sources outside, with the
//!   `1/|y|` subtraction), giving `V_f = 4pi (I1[W_f] + I2[W_f])` and
//!   `D(f, h) = int V_f h`;
//! * the logarithmic one, `Vt_f(x) = -2 int log|x-y| f(y) dy` and
//!   `D2(f, g) = int Vt_f g`.
//!
//! All integrals are evaluated by direct summation over source nodes with
//! trapezoid weights. The singular self term is handled by a [`SelfInteraction`]
//! rule. Kernel values depend only on the node offset, so each operator keeps a
//! `(2Na - 1) x (2Nb - 1)` table instead of a full matrix.

use std::f64::consts::{LN_2, PI, SQRT_2};

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{integrate, Grid, ScalarField};

/// Relative neutrality tolerance: `|int f| <= NEUTRALITY_TOL * (||f||_1 + 1)`.
pub const NEUTRALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `1/|y|`
    Riesz,
    /// `-2 log|y|`
    Log,
}

/// How the source node coinciding with the target node contributes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfInteraction {
    /// Exact average of the kernel over the target's cell, times the cell area.
    #[default]
    CellAverage,
    /// Drop the singular node from the sum.
    Omit,
}

impl std::str::FromStr for SelfInteraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell-average" => Ok(Self::CellAverage),
            "omit" => Ok(Self::Omit),
            other => Err(Error::InvalidConfig(format!(
                "unknown self-interaction rule `{other}` (expected cell-average or omit)"
            ))),
        }
    }
}

/// Regularization of one singular kernel on one grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelCellRule {
    pub kind: KernelKind,
    /// Cell average of the kernel around the singularity.
    pub self_cell_value: f64,
}

impl KernelCellRule {
    pub fn new(kind: KernelKind, hx: f64, hy: f64) -> Result<Self> {
        Ok(Self {
            kind,
            self_cell_value: cell_kernel_integral(kind, hx, hy)?,
        })
    }
}

/// `(1 / h^2) * int_{[-h/2, h/2]^2} K(y) dy` for a square cell of side `h`.
///
/// Riesz: `4 ln(1 + sqrt 2) / h`. Log: `3 + ln 2 - pi/2 - 2 ln h`.
pub fn cell_kernel_integral(kind: KernelKind, hx: f64, hy: f64) -> Result<f64> {
    if !(hx > 0.0 && hy > 0.0) || (hx - hy).abs() > 1e-12 * hx.max(hy) {
        return Err(Error::NonSquareCells { hx, hy });
    }
    let h = hx;
    Ok(match kind {
        KernelKind::Riesz => 4.0 * (1.0 + SQRT_2).ln() / h,
        KernelKind::Log => 3.0 + LN_2 - 0.5 * PI - 2.0 * h.ln(),
    })
}

/// A field whose integral vanishes to within [`NEUTRALITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralField(ScalarField);

impl NeutralField {
    pub fn new(field: ScalarField) -> Result<Self> {
        let (integral, tolerance) = neutrality_defect(&field);
        if integral.abs() > tolerance {
            return Err(Error::NotNeutral { integral, tolerance });
        }
        Ok(Self(field))
    }

    /// Subtracts the mean over the domain so that the trapezoid integral
    /// vanishes.
    pub fn project(field: &ScalarField) -> Self {
        let shift = integrate(field) / field.grid().area();
        Self(field.map(|v| v - shift))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }
}

impl AsRef<ScalarField> for NeutralField {
    fn as_ref(&self) -> &ScalarField {
        &self.0
    }
}

/// Returns `(int f, tolerance)`.
pub fn neutrality_defect(f: &ScalarField) -> (f64, f64) {
    let l1 = integrate(&f.map(f64::abs));
    (integrate(f), NEUTRALITY_TOL * (l1 + 1.0))
}

fn warn_if_charged(f: &ScalarField, what: &str) {
    let (integral, tolerance) = neutrality_defect(f);
    if integral.abs() > tolerance {
        log::warn!("{what}: charge {integral:e} exceeds neutrality tolerance {tolerance:e}");
    }
}

/// Kernel table indexed by node offset.
#[derive(Debug, Clone)]
struct OffsetKernel {
    na: usize,
    nb: usize,
    /// `(2na - 1) x (2nb - 1)`, centre entry zero.
    table: Vec<f64>,
    /// Multiplier of `f(x)` for the self term (already includes the cell area).
    self_coef: f64,
}

impl OffsetKernel {
    fn new(grid: &Grid, kernel: impl Fn(f64) -> f64, self_coef: f64) -> Self {
        let (na, nb) = (grid.na(), grid.nb());
        let (mx, my) = (2 * na - 1, 2 * nb - 1);
        let mut table = vec![0.0; mx * my];
        for p in 0..mx {
            let dx = (p as f64 - (na - 1) as f64) * grid.hx();
            for q in 0..my {
                let dy = (q as f64 - (nb - 1) as f64) * grid.hy();
                if p != na - 1 || q != nb - 1 {
                    table[p * my + q] = kernel(dx.hypot(dy));
                }
            }
        }
        Self {
            na,
            nb,
            table,
            self_coef,
        }
    }

    /// `out(x) = sum_{y != x, src(y)} T(x - y) g(y) + [src(x)] self_coef * f(x)`
    /// where `g` already carries the quadrature weights.
    fn apply(&self, weighted: &[f64], raw: &[f64], source: Option<&[bool]>) -> Vec<f64> {
        let (na, nb) = (self.na, self.nb);
        let my = 2 * nb - 1;
        let mut out = vec![0.0; na * nb];
        out.par_chunks_mut(nb).enumerate().for_each(|(i, row)| {
            for (k, gk_row) in weighted.chunks(nb).enumerate() {
                let p = i + na - 1 - k;
                let trow = &self.table[p * my..(p + 1) * my];
                for (j, o) in row.iter_mut().enumerate() {
                    // q = j - l + nb - 1 runs downwards as l increases.
                    let base = j + nb - 1;
                    let mut s = 0.0;
                    for (l, g) in gk_row.iter().enumerate() {
                        s += trow[base - l] * g;
                    }
                    *o += s;
                }
            }
            for (j, o) in row.iter_mut().enumerate() {
                let x = i * nb + j;
                if source.map_or(true, |m| m[x]) {
                    *o += self.self_coef * raw[x];
                }
            }
        });
        out
    }
}

/// Regularized and logarithmic 2D Coulomb operators for one grid.
#[derive(Debug, Clone)]
pub struct Coulomb2d {
    grid: Grid,
    rule: SelfInteraction,
    weights: Vec<f64>,
    riesz: OffsetKernel,
    log: OffsetKernel,
    /// `|y| < 1` on exact node coordinates.
    inner: Vec<bool>,
    outer: Vec<bool>,
    inv_radius: Vec<f64>,
}

impl Coulomb2d {
    pub fn new(grid: Grid, rule: SelfInteraction) -> Result<Self> {
        let (riesz_self, log_self) = match rule {
            SelfInteraction::CellAverage => {
                let area = grid.cell_area();
                (
                    cell_kernel_integral(KernelKind::Riesz, grid.hx(), grid.hy())? * area,
                    cell_kernel_integral(KernelKind::Log, grid.hx(), grid.hy())? * area,
                )
            }
            SelfInteraction::Omit => (0.0, 0.0),
        };
        let riesz = OffsetKernel::new(&grid, |r| 1.0 / (2.0 * PI * r), riesz_self / (2.0 * PI));
        let log = OffsetKernel::new(&grid, |r| -2.0 * r.ln(), log_self);
        let mut inner = Vec::with_capacity(grid.len());
        let mut inv_radius = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let (i, j) = grid.coords(k);
            let r = grid.x(i).hypot(grid.y(j));
            inner.push(r < 1.0);
            inv_radius.push(if r >= 1.0 { 1.0 / r } else { 0.0 });
        }
        let outer = inner.iter().map(|b| !b).collect();
        Ok(Self {
            weights: grid.weights(),
            grid,
            rule,
            riesz,
            log,
            inner,
            outer,
            inv_radius,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rule(&self) -> SelfInteraction {
        self.rule
    }

    fn weighted(&self, f: &ScalarField, mask: Option<&[bool]>) -> Vec<f64> {
        f.values()
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(k, (v, w))| if mask.map_or(true, |m| m[k]) { v * w } else { 0.0 })
            .collect()
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.grid().same_as(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Riesz potential `W_f`.
    pub fn riesz_w(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let out = self.riesz.apply(&self.weighted(f, None), f.values(), None);
        Ok(ScalarField::from_vec_unchecked(self.grid, out))
    }

    /// `I1^g(x) = (1/2pi) int_{|y|<1} g(y) / |x-y| dy`.
    pub fn modified_riesz_i1(&self, g: &ScalarField) -> Result<ScalarField> {
        self.check(g)?;
        let out = self
            .riesz
            .apply(&self.weighted(g, Some(&self.inner)), g.values(), Some(&self.inner));
        Ok(ScalarField::from_vec_unchecked(self.grid, out))
    }

    /// `I2^g(x) = (1/2pi) int_{|y|>=1} (1/|x-y| - 1/|y|) g(y) dy`.
    pub fn modified_riesz_i2(&self, g: &ScalarField) -> Result<ScalarField> {
        self.check(g)?;
        let weighted = self.weighted(g, Some(&self.outer));
        let mut out = self.riesz.apply(&weighted, g.values(), Some(&self.outer));
        let at_origin: f64 = weighted
            .iter()
            .zip(&self.inv_radius)
            .map(|(g, ir)| g * ir)
            .sum::<f64>()
            / (2.0 * PI);
        out.iter_mut().for_each(|v| *v -= at_origin);
        Ok(ScalarField::from_vec_unchecked(self.grid, out))
    }

    /// `V_f = 4pi (I1[W_f] + I2[W_f])`. Logs a warning when `f` is charged.
    pub fn mean_field_potential(&self, f: &ScalarField) -> Result<ScalarField> {
        warn_if_charged(f, "mean_field_potential");
        self.mean_field_potential_unchecked(f)
    }

    pub(crate) fn mean_field_potential_unchecked(&self, f: &ScalarField) -> Result<ScalarField> {
        let w = self.riesz_w(f)?;
        let i1 = self.modified_riesz_i1(&w)?;
        let i2 = self.modified_riesz_i2(&w)?;
        Ok(ScalarField::from_vec_unchecked(
            self.grid,
            i1.values()
                .iter()
                .zip(i2.values())
                .map(|(a, b)| 4.0 * PI * (a + b))
                .collect(),
        ))
    }

    /// `D(f, h) = int V_f h`.
    pub fn hartree_energy(&self, f: &ScalarField, h: &ScalarField) -> Result<f64> {
        warn_if_charged(h, "hartree_energy");
        let v = self.mean_field_potential(f)?;
        v.dot(h)
    }

    /// `Vt_f(x) = -2 int log|x-y| f(y) dy`.
    pub fn log_potential(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let out = self.log.apply(&self.weighted(f, None), f.values(), None);
        Ok(ScalarField::from_vec_unchecked(self.grid, out))
    }

    /// `D2(f, g) = int Vt_f g`.
    pub fn log_energy(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        self.log_potential(f)?.dot(g)
    }

    /// Potential of the selected interaction model.
    pub fn potential(&self, model: Interaction, f: &ScalarField) -> Result<ScalarField> {
        match model {
            Interaction::Regularized => self.mean_field_potential_unchecked(f),
            Interaction::Log => self.log_potential(f),
        }
    }
}

/// Which Hartree interaction a solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interaction {
    Regularized,
    Log,
}

/// `D(f, g) = 4pi int conj(F f)(k) F g(k) / |k|^2 dk` evaluated with a discrete
/// Fourier transform on a grid zero-padded by `padding` along each axis.
///
/// The padded transform is periodic, so the value carries an image-charge
/// error that shrinks as `padding` grows. It is a cross-check only; the k = 0
/// mode is dropped.
pub fn hartree_energy_fourier(f: &ScalarField, g: &ScalarField, padding: usize) -> Result<f64> {
    f.check_grid(g)?;
    if padding < 1 {
        return Err(Error::InvalidConfig("padding factor must be >= 1".into()));
    }
    let grid = *f.grid();
    let (na, nb) = (grid.na(), grid.nb());
    let (mx, my) = (na * padding, nb * padding);
    let weights = grid.weights();

    let transform = |field: &ScalarField| {
        let mut data = vec![Complex64::new(0.0, 0.0); mx * my];
        for i in 0..na {
            for j in 0..nb {
                let k = grid.index(i, j);
                data[i * my + j] = Complex64::new(field.values()[k] * weights[k], 0.0);
            }
        }
        fft2(&mut data, mx, my);
        data
    };
    let ff = transform(f);
    let fg = transform(g);

    let (lx, ly) = (mx as f64 * grid.hx(), my as f64 * grid.hy());
    let (dkx, dky) = (2.0 * PI / lx, 2.0 * PI / ly);
    let mut total = 0.0;
    for p in 0..mx {
        let kp = if p <= mx / 2 { p as f64 } else { p as f64 - mx as f64 } * dkx;
        for q in 0..my {
            if p == 0 && q == 0 {
                continue;
            }
            let kq = if q <= my / 2 { q as f64 } else { q as f64 - my as f64 } * dky;
            let idx = p * my + q;
            // (1/2pi) normalization of F appears squared.
            total += (ff[idx].conj() * fg[idx]).re / (kp * kp + kq * kq);
        }
    }
    Ok(4.0 * PI * total * dkx * dky / (4.0 * PI * PI))
}

fn fft2(data: &mut [Complex64], rows: usize, cols: usize) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(cols);
    for row in data.chunks_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
}
