//! Thomas–Fermi model: energy, Fermi level, self-consistent iteration with
//! energy-optimal damping, a direct constrained minimizer, and a report
//! comparing two ground states.

use std::f64::consts::PI;

use log::debug;
use rayon::prelude::*;
use serde::Serialize;

use crate::coulomb::{Coulomb2d, Interaction};
use crate::error::{Error, Result};
use crate::field::{integrate, interior_l2, masked_l2, weighted_dot, ChargeDistribution, Grid, ScalarField};
use crate::io::HistoryEntry;
use crate::line_search::minimize_unit_interval;

/// Kinetic constant used for the nanowire runs.
pub const C_TF_NANOWIRE: f64 = 2.0 * PI * PI / 3.0;

/// `3/10 (3 pi^2)^(2/3)`, the semiclassical constant.
pub fn c_tf_semiclassical() -> f64 {
    0.3 * (3.0 * PI * PI).powf(2.0 / 3.0)
}

const MAX_BRACKET_GROWTHS: usize = 200;
const MAX_BISECTIONS: usize = 200;
const LINE_SEARCH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TfConfig {
    pub c_tf: f64,
    /// Stop when two successive energies differ by less than this.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Number of equally spaced mixing parameters probed in `[0, 1]`.
    pub mixing_samples: usize,
    pub lambda_bracket_growth: f64,
    /// Charge tolerance of the Fermi-level bisection, relative to `Z`.
    pub dichotomy_rel_tol: f64,
}

impl Default for TfConfig {
    fn default() -> Self {
        Self {
            c_tf: C_TF_NANOWIRE,
            epsilon: 1e-5,
            max_iter: 100,
            mixing_samples: 11,
            lambda_bracket_growth: 2.0,
            dichotomy_rel_tol: 1e-9,
        }
    }
}

impl TfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.c_tf > 0.0 && self.c_tf.is_finite()) {
            return bad("c_tf must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.mixing_samples < 2 {
            return bad("mixing_samples must be at least 2");
        }
        if !(self.lambda_bracket_growth > 1.0) {
            return bad("lambda_bracket_growth must exceed 1");
        }
        if !(self.dichotomy_rel_tol > 0.0 && self.dichotomy_rel_tol < 1.0) {
            return bad("dichotomy_rel_tol must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Energy split; `hartree` already carries the factor one half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub hartree: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, hartree: f64) -> Self {
        Self { kinetic, hartree, total: kinetic + hartree }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfResult {
    pub model: Interaction,
    pub rho: ScalarField,
    /// Mean-field potential of `rho - mu`.
    pub potential: ScalarField,
    pub lambda: f64,
    pub energy: EnergyBreakdown,
    pub history: Vec<HistoryEntry>,
    pub converged: bool,
    pub iterations: usize,
}

fn kinetic(grid: &Grid, c_tf: f64, rho: &[f64]) -> f64 {
    let pow: Vec<f64> = rho.iter().map(|r| r.powf(5.0 / 3.0)).collect();
    c_tf * weighted_dot(grid, &pow, &vec![1.0; pow.len()])
}

fn check_density(rho: &ScalarField) -> Result<()> {
    match rho.values().iter().position(|v| *v < 0.0) {
        Some(k) => Err(Error::Negative { node: k, value: rho.values()[k] }),
        None => Ok(()),
    }
}

/// `c_tf int rho^(5/3) + 1/2 D(rho - mu, rho - mu)`.
pub fn tf_energy(
    coulomb: &Coulomb2d,
    rho: &ScalarField,
    mu: &ChargeDistribution,
    cfg: &TfConfig,
    model: Interaction,
) -> Result<EnergyBreakdown> {
    check_density(rho)?;
    let f = rho - mu.field();
    let v = coulomb.potential(model, &f)?;
    Ok(EnergyBreakdown::new(kinetic(rho.grid(), cfg.c_tf, rho.values()), 0.5 * v.dot(&f)?))
}

/// `(3/(5 c_tf) (lambda - V)_+)^(3/2)`.
pub fn density_from_potential(v: &ScalarField, lambda: f64, c_tf: f64) -> ScalarField {
    let k = 3.0 / (5.0 * c_tf);
    let values = v.values().par_iter().map(|&vi| (k * (lambda - vi).max(0.0)).powf(1.5)).collect();
    ScalarField::from_vec_unchecked(*v.grid(), values)
}

/// Bisection for `int density_from_potential(V, lambda) = z`.
pub fn fermi_level(v: &ScalarField, z: f64, c_tf: f64, cfg: &TfConfig) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidCharge(format!("target charge must be positive, got {z}")));
    }
    let excess = |lambda: f64| integrate(&density_from_potential(v, lambda, c_tf)) - z;
    let lo0 = v.min();
    if !lo0.is_finite() {
        return Err(Error::BracketNotFound(0));
    }
    let mut lo = lo0;
    let mut hi = lo0 + 1.0;
    let mut growths = 0;
    while excess(hi) <= 0.0 {
        if growths == MAX_BRACKET_GROWTHS {
            return Err(Error::BracketNotFound(growths));
        }
        lo = hi;
        hi = lo0 + cfg.lambda_bracket_growth * (hi - lo0);
        growths += 1;
    }
    let tol = cfg.dichotomy_rel_tol * z;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let e = excess(mid);
        if e.abs() <= tol {
            return Ok(mid);
        }
        if e < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn combine(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Energy along `rho + t * delta`, with the Hartree part expanded as a
/// quadratic from `V[rho - mu]` and `V[delta]`.
struct LineEnergy<'a> {
    grid: &'a Grid,
    c_tf: f64,
    rho: &'a [f64],
    delta: &'a [f64],
    h0: f64,
    h1: f64,
    h2: f64,
}

impl<'a> LineEnergy<'a> {
    fn new(grid: &'a Grid, c_tf: f64, rho: &'a [f64], delta: &'a [f64], f0: &[f64], v0: &[f64], vd: &[f64]) -> Self {
        Self {
            grid,
            c_tf,
            rho,
            delta,
            h0: 0.5 * weighted_dot(grid, v0, f0),
            h1: weighted_dot(grid, v0, delta),
            h2: 0.5 * weighted_dot(grid, vd, delta),
        }
    }

    fn at(&self, t: f64) -> EnergyBreakdown {
        let rho: Vec<f64> = self.rho.iter().zip(self.delta).map(|(r, d)| (r + t * d).max(0.0)).collect();
        EnergyBreakdown::new(kinetic(self.grid, self.c_tf, &rho), self.h0 + t * (self.h1 + t * self.h2))
    }
}

/// Self-consistent iteration from `rho_0 = mu`, mixing each new Fermi density
/// with the current one at the energy-minimizing parameter.
pub fn scf_solve(coulomb: &Coulomb2d, mu: &ChargeDistribution, cfg: &TfConfig, model: Interaction) -> Result<TfResult> {
    scf_solve_from(coulomb, mu, cfg, model, mu.field())
}

/// As [`scf_solve`], starting from `initial` (which must carry charge `Z`).
pub fn scf_solve_from(
    coulomb: &Coulomb2d,
    mu: &ChargeDistribution,
    cfg: &TfConfig,
    model: Interaction,
    initial: &ScalarField,
) -> Result<TfResult> {
    cfg.validate()?;
    mu.field().check_grid(initial)?;
    check_density(initial)?;
    let grid = *mu.grid();
    let z = mu.charge();

    let mut rho = initial.values().to_vec();
    let mut f0 = combine(&rho, -1.0, mu.field().values());
    let mut v0 = coulomb.potential(model, &ScalarField::from_vec_unchecked(grid, f0.clone()))?.into_values();
    let mut energy = EnergyBreakdown::new(kinetic(&grid, cfg.c_tf, &rho), 0.5 * weighted_dot(&grid, &v0, &f0));
    let mut lambda = fermi_level(&ScalarField::from_vec_unchecked(grid, v0.clone()), z, cfg.c_tf, cfg)?;
    let mut history = vec![HistoryEntry { iter: 0, energy: energy.total, lambda, t: 0.0 }];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let v_field = ScalarField::from_vec_unchecked(grid, v0.clone());
        let target = density_from_potential(&v_field, lambda, cfg.c_tf);
        let delta = combine(target.values(), -1.0, &rho);
        let vd = coulomb.potential(model, &ScalarField::from_vec_unchecked(grid, delta.clone()))?.into_values();

        let line = LineEnergy::new(&grid, cfg.c_tf, &rho, &delta, &f0, &v0, &vd);
        let (t, _) = minimize_unit_interval(|t| line.at(t).total, cfg.mixing_samples, LINE_SEARCH_TOL);
        let next = line.at(t);

        rho = combine(&rho, t, &delta).into_iter().map(|r| r.max(0.0)).collect();
        f0 = combine(&f0, t, &delta);
        v0 = combine(&v0, t, &vd);
        iterations += 1;
        let change = (energy.total - next.total).abs();
        energy = next;
        history.push(HistoryEntry { iter: iterations, energy: energy.total, lambda, t });
        debug!("tf scf {iterations}: E = {:.10} lambda = {lambda:.8} t = {t:.4}", energy.total);
        lambda = fermi_level(&ScalarField::from_vec_unchecked(grid, v0.clone()), z, cfg.c_tf, cfg)?;
        if change < cfg.epsilon {
            converged = true;
            break;
        }
    }

    Ok(TfResult {
        model,
        rho: ScalarField::from_vec_unchecked(grid, rho),
        potential: ScalarField::from_vec_unchecked(grid, v0),
        lambda,
        energy,
        history,
        converged,
        iterations,
    })
}

/// Euclidean projection, in the quadrature-weighted metric, onto
/// `{rho >= 0, integrate(rho) = z}`: `rho = (y - tau)_+`.
pub(crate) fn project_simplex(grid: &Grid, y: &[f64], z: f64) -> Vec<f64> {
    let mass = |tau: f64| -> f64 {
        let p: Vec<f64> = y.iter().map(|v| (v - tau).max(0.0)).collect();
        weighted_dot(grid, &p, &vec![1.0; p.len()])
    };
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    // mass(hi) = 0 < z; mass decreases in tau.
    let mut hi = ymax;
    let mut lo = ymin - z / grid.area();
    while mass(lo) < z {
        lo -= (hi - lo).max(1.0);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > z {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut p: Vec<f64> = y.iter().map(|v| (v - tau).max(0.0)).collect();
    // Exact charge after the bisection's last bit of slack.
    let m = weighted_dot(grid, &p, &vec![1.0; p.len()]);
    if m > 0.0 {
        p.iter_mut().for_each(|v| *v *= z / m);
    }
    p
}

/// Minimizes the discrete log-model energy over `rho >= 0`,
/// `integrate(rho) = Z`, starting from `mu`.
///
/// Spectral projected gradient: Barzilai–Borwein trial step, projection onto
/// the feasible set, exact line search on the feasible segment. Every
/// accepted iterate lowers the energy.
pub fn direct_minimize_log(coulomb: &Coulomb2d, mu: &ChargeDistribution, cfg: &TfConfig) -> Result<TfResult> {
    direct_minimize_log_from(coulomb, mu, cfg, mu.field())
}

/// As [`direct_minimize_log`], from `initial` projected onto the feasible set.
pub fn direct_minimize_log_from(
    coulomb: &Coulomb2d,
    mu: &ChargeDistribution,
    cfg: &TfConfig,
    initial: &ScalarField,
) -> Result<TfResult> {
    cfg.validate()?;
    mu.field().check_grid(initial)?;
    check_density(initial)?;
    let grid = *mu.grid();
    let z = mu.charge();
    let model = Interaction::Log;
    let potential = |v: Vec<f64>| coulomb.potential(model, &ScalarField::from_vec_unchecked(grid, v)).map(|f| f.into_values());
    let gradient = |rho: &[f64], v: &[f64]| -> Vec<f64> {
        rho.iter().zip(v).map(|(r, vi)| 5.0 / 3.0 * cfg.c_tf * r.powf(2.0 / 3.0) + vi).collect()
    };
    let level = |v: &[f64]| fermi_level(&ScalarField::from_vec_unchecked(grid, v.to_vec()), z, cfg.c_tf, cfg);

    let mut rho = project_simplex(&grid, initial.values(), z);
    let mut f0 = combine(&rho, -1.0, mu.field().values());
    let mut v0 = potential(f0.clone())?;
    let mut energy = EnergyBreakdown::new(kinetic(&grid, cfg.c_tf, &rho), 0.5 * weighted_dot(&grid, &v0, &f0));
    let mut grad = gradient(&rho, &v0);
    let mut history = vec![HistoryEntry { iter: 0, energy: energy.total, lambda: level(&v0)?, t: 0.0 }];
    let mut step = 1.0 / grad.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-12);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let trial: Vec<f64> = rho.iter().zip(&grad).map(|(r, g)| r - step * g).collect();
        let delta = combine(&project_simplex(&grid, &trial, z), -1.0, &rho);
        let slope = weighted_dot(&grid, &grad, &delta);
        iterations += 1;
        if !(slope < 0.0) {
            // Projected gradient vanishes: stationary.
            history.push(HistoryEntry { iter: iterations, energy: energy.total, lambda: level(&v0)?, t: 0.0 });
            converged = true;
            break;
        }
        let vd = potential(delta.clone())?;
        let line = LineEnergy::new(&grid, cfg.c_tf, &rho, &delta, &f0, &v0, &vd);
        let (s, _) = minimize_unit_interval(|t| line.at(t).total, cfg.mixing_samples, LINE_SEARCH_TOL);
        let next = line.at(s);

        let new_rho: Vec<f64> = combine(&rho, s, &delta).into_iter().map(|r| r.max(0.0)).collect();
        f0 = combine(&f0, s, &delta);
        v0 = combine(&v0, s, &vd);
        let new_grad = gradient(&new_rho, &v0);
        let ds = combine(&new_rho, -1.0, &rho);
        let dg = combine(&new_grad, -1.0, &grad);
        let curvature = weighted_dot(&grid, &ds, &dg);
        step = if curvature > 0.0 {
            (weighted_dot(&grid, &ds, &ds) / curvature).clamp(1e-10, 1e10)
        } else {
            (step * 2.0).min(1e10)
        };
        rho = new_rho;
        grad = new_grad;
        let change = (energy.total - next.total).abs();
        energy = next;
        history.push(HistoryEntry { iter: iterations, energy: energy.total, lambda: level(&v0)?, t: s });
        debug!("log descent {iterations}: E = {:.10} step = {s:.4}", energy.total);
        if change < cfg.epsilon {
            converged = true;
            break;
        }
    }

    let lambda = history.last().map(|h| h.lambda).unwrap_or(f64::NAN);
    Ok(TfResult {
        model,
        rho: ScalarField::from_vec_unchecked(grid, rho),
        potential: ScalarField::from_vec_unchecked(grid, v0),
        lambda,
        energy,
        history,
        converged,
        iterations,
    })
}

/// `||rho - rho[V, lambda]|| / ||rho||`: distance from the self-consistent
/// equation at a computed state.
pub fn euler_lagrange_residual(result: &TfResult, c_tf: f64) -> f64 {
    let target = density_from_potential(&result.potential, result.lambda, c_tf);
    let diff = &result.rho - &target;
    let n = diff.dot(&diff).unwrap_or(f64::NAN).sqrt();
    n / result.rho.dot(&result.rho).unwrap_or(f64::NAN).sqrt()
}

/// Nodes within `cells` grid steps (Chebyshev distance) of a node where `mu > 0`.
pub fn near_material_mask(mu: &ScalarField, cells: usize) -> Vec<bool> {
    let g = mu.grid();
    let mut mask = vec![false; g.len()];
    for (k, &v) in mu.values().iter().enumerate() {
        if v > 0.0 {
            let (i, j) = g.coords(k);
            for ii in i.saturating_sub(cells)..=(i + cells).min(g.na() - 1) {
                for jj in j.saturating_sub(cells)..=(j + cells).min(g.nb() - 1) {
                    mask[g.index(ii, jj)] = true;
                }
            }
        }
    }
    mask
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Differences between a regularized and a log-model ground state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub energy_reg: f64,
    pub energy_log: f64,
    /// `|E_reg - E_log| / |E_log|`.
    pub energy_gap_rel: f64,
    /// Near-material relative L2 density difference.
    pub density_err_rel: f64,
    /// Interior relative L2 difference between the gauge-fixed potentials.
    pub potential_err_rel: f64,
    /// Potential difference restricted to the near-material nodes.
    pub potential_err_rel_near_material: f64,
    /// Density difference over the whole grid.
    pub density_err_rel_domain: f64,
    pub iterations_reg: usize,
    pub iterations_log: usize,
    /// `|V_reg - lambda_reg - V_log|` at every node.
    #[serde(skip)]
    pub potential_diff: ScalarField,
    /// `|rho_reg - rho_log|` at every node.
    #[serde(skip)]
    pub density_diff: ScalarField,
}

/// Cells by which the support of `mu` is dilated to define the material's
/// vicinity.
pub const NEAR_MATERIAL_CELLS: usize = 2;

/// Potential in the gauge used for comparisons: regularized potentials are
/// shifted by their Fermi level, log-model potentials are left as they are.
pub fn gauge_fixed_potential(r: &TfResult) -> ScalarField {
    match r.model {
        Interaction::Regularized => r.potential.map(|v| v - r.lambda),
        Interaction::Log => r.potential.clone(),
    }
}

/// Compares two solutions on a common grid, potentials in the gauge of
/// [`gauge_fixed_potential`].
pub fn compare(reg: &TfResult, log: &TfResult, mu: &ScalarField) -> Result<ComparisonReport> {
    reg.rho.check_grid(&log.rho)?;
    reg.rho.check_grid(mu)?;
    let reference = gauge_fixed_potential(log);
    let dv = &gauge_fixed_potential(reg) - &reference;
    let drho = &reg.rho - &log.rho;
    let near = near_material_mask(mu, NEAR_MATERIAL_CELLS);
    let g = *mu.grid();
    let in_near = |i: usize, j: usize| near[g.index(i, j)];
    Ok(ComparisonReport {
        energy_reg: reg.energy.total,
        energy_log: log.energy.total,
        energy_gap_rel: ratio((reg.energy.total - log.energy.total).abs(), log.energy.total.abs()),
        density_err_rel: ratio(masked_l2(&drho, in_near), masked_l2(&log.rho, in_near)),
        potential_err_rel: ratio(interior_l2(&dv), interior_l2(&reference)),
        potential_err_rel_near_material: ratio(masked_l2(&dv, in_near), masked_l2(&reference, in_near)),
        density_err_rel_domain: ratio(masked_l2(&drho, |_, _| true), masked_l2(&log.rho, |_, _| true)),
        iterations_reg: reg.iterations,
        iterations_log: log.iterations,
        potential_diff: dv.map(f64::abs),
        density_diff: drho.map(f64::abs),
    })
}
