//! Reduced Hartree–Fock model on the transverse plane.
//!
//! States are low-rank nonnegative operators `G = sum_j g_j |phi_j><phi_j|`
//! acting on grid functions that vanish on the boundary ring. Internally a
//! mode is stored as an l2-unit vector over interior nodes; the grid function
//! is that vector divided by `sqrt(hx * hy)`, so it is orthonormal for the
//! trapezoid inner product.

mod eigen;
mod kinetic;

use std::f64::consts::{PI, SQRT_2};

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coulomb::{Coulomb2d, Interaction};
use crate::error::{Error, Result};
use crate::field::{weighted_dot, ChargeDistribution, Grid, ScalarField};
use crate::io::HistoryEntry;
use crate::line_search::minimize_unit_interval;
use crate::tf::EnergyBreakdown;

pub use kinetic::{
    bathtub_objective, bathtub_oracle, kinetic_fiber_quadrature, kinetic_reduced, lieb_thirring_diagnostic,
};

/// Occupation weight `(sqrt 2 / pi) sqrt((lambda - e)_+)` of a level `e`.
pub fn occupation(lambda: f64, e: f64) -> f64 {
    SQRT_2 / PI * (lambda - e).max(0.0).sqrt()
}

const ORTHONORMAL_TOL: f64 = 1e-10;
/// Mixed-state weights below this fraction of the largest are dropped.
const WEIGHT_CUTOFF: f64 = 1e-13;
/// Overlap directions below this fraction of the largest are dropped when
/// orthonormalizing the union of two mode sets.
const OVERLAP_CUTOFF: f64 = 1e-11;

fn interior_dims(grid: &Grid) -> (usize, usize) {
    (grid.na() - 2, grid.nb() - 2)
}

fn interior_len(grid: &Grid) -> usize {
    let (m, n) = interior_dims(grid);
    m * n
}

fn interior_of(field: &ScalarField) -> Vec<f64> {
    let g = field.grid();
    let mut out = Vec::with_capacity(interior_len(g));
    for i in 1..g.na() - 1 {
        for j in 1..g.nb() - 1 {
            out.push(field.get(i, j));
        }
    }
    out
}

fn embed(grid: Grid, interior: impl IntoIterator<Item = f64>) -> ScalarField {
    let mut values = vec![0.0; grid.len()];
    let nb = grid.nb() - 2;
    for (p, v) in interior.into_iter().enumerate() {
        values[grid.index(p / nb + 1, p % nb + 1)] = v;
    }
    ScalarField::from_vec_unchecked(grid, values)
}

/// `-Delta_h u` with homogeneous Dirichlet data, on interior vectors.
pub(crate) fn neg_laplacian(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let (m, n) = interior_dims(grid);
    let (cx, cy) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let p = i * n + j;
            let mut s = 2.0 * (cx + cy) * u[p];
            if i > 0 {
                s -= cx * u[p - n];
            }
            if i + 1 < m {
                s -= cx * u[p + n];
            }
            if j > 0 {
                s -= cy * u[p - 1];
            }
            if j + 1 < n {
                s -= cy * u[p + 1];
            }
            out[p] = s;
        }
    }
    out
}

/// `G = sum_j g_j |phi_j><phi_j|` with `g_j > 0` and orthonormal modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    grid: Grid,
    weights: Vec<f64>,
    /// Interior nodes by rank, l2-orthonormal columns.
    modes: DMatrix<f64>,
}

impl ReducedState {
    pub fn zero(grid: Grid) -> Self {
        Self { grid, weights: Vec::new(), modes: DMatrix::zeros(interior_len(&grid), 0) }
    }

    /// Builds a state from weights and grid functions that vanish on the
    /// boundary and are orthonormal for the trapezoid inner product.
    /// Zero weights are discarded.
    pub fn from_modes(grid: Grid, weights: &[f64], modes: &[ScalarField]) -> Result<Self> {
        if weights.len() != modes.len() {
            return Err(Error::ShapeMismatch { expected: weights.len(), found: modes.len() });
        }
        if let Some((k, &g)) = weights.iter().enumerate().find(|(_, g)| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::Negative { node: k, value: g });
        }
        let scale = (grid.hx() * grid.hy()).sqrt();
        let mut cols = Vec::new();
        for m in modes {
            if !m.grid().same_as(&grid) {
                return Err(Error::GridMismatch);
            }
            let boundary = (0..grid.len()).find(|&k| {
                let (i, j) = grid.coords(k);
                grid.is_boundary(i, j) && m.values()[k] != 0.0
            });
            if let Some(k) = boundary {
                return Err(Error::InvalidConfig(format!("mode does not vanish on the boundary (node {k})")));
            }
            cols.push(DVector::from_iterator(interior_len(&grid), interior_of(m).into_iter().map(|v| v * scale)));
        }
        let all = if cols.is_empty() { DMatrix::zeros(interior_len(&grid), 0) } else { DMatrix::from_columns(&cols) };
        let gram = all.transpose() * &all;
        let defect = (gram - DMatrix::identity(modes.len(), modes.len())).abs().max();
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidConfig(format!("modes are not orthonormal (defect {defect:.3e})")));
        }
        let keep: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > 0.0).collect();
        Ok(Self {
            grid,
            weights: keep.iter().map(|&k| weights[k]).collect(),
            modes: all.select_columns(&keep),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn trace(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Grid function of mode `j`.
    pub fn mode(&self, j: usize) -> ScalarField {
        let scale = 1.0 / (self.grid.hx() * self.grid.hy()).sqrt();
        embed(self.grid, self.modes.column(j).iter().map(|v| v * scale))
    }

    pub(crate) fn interior_modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    /// `||G||_F`.
    pub fn frobenius_norm(&self) -> f64 {
        self.weights.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// `Tr(G H)` for another state.
    fn trace_product(&self, other: &Self) -> f64 {
        let overlap = self.modes.transpose() * &other.modes;
        let mut s = 0.0;
        for (i, a) in self.weights.iter().enumerate() {
            for (j, b) in other.weights.iter().enumerate() {
                s += a * b * overlap[(i, j)].powi(2);
            }
        }
        s
    }
}

/// `||G - G'||_F / ||G||_F`.
pub fn relative_distance(g: &ReducedState, other: &ReducedState) -> f64 {
    let sq = g.frobenius_norm().powi(2) + other.frobenius_norm().powi(2) - 2.0 * g.trace_product(other);
    sq.max(0.0).sqrt() / g.frobenius_norm()
}

/// `rho_G = sum_j g_j |phi_j|^2`.
pub fn density_of_state(state: &ReducedState) -> ScalarField {
    let grid = state.grid;
    let scale = 1.0 / (grid.hx() * grid.hy());
    let mut rho = vec![0.0; interior_len(&grid)];
    for (j, g) in state.weights.iter().enumerate() {
        for (r, u) in rho.iter_mut().zip(state.modes.column(j).iter()) {
            *r += g * u * u * scale;
        }
    }
    embed(grid, rho)
}

/// `-1/2 Delta_h + V` on grid functions with homogeneous Dirichlet data.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHamiltonian {
    grid: Grid,
    potential: Vec<f64>,
}

pub fn assemble_hamiltonian(v: &ScalarField) -> Result<DiscreteHamiltonian> {
    let grid = *v.grid();
    if let Some(k) = v.values().iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    Ok(DiscreteHamiltonian { grid, potential: interior_of(v) })
}

/// Sorted eigenvalues with their l2-orthonormal interior eigenvectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Grid,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl DiscreteHamiltonian {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of unknowns (interior nodes).
    pub fn dim(&self) -> usize {
        self.potential.len()
    }

    fn apply_interior(&self, u: &[f64]) -> Vec<f64> {
        let mut out = neg_laplacian(&self.grid, u);
        for ((o, v), x) in out.iter_mut().zip(&self.potential).zip(u) {
            *o = 0.5 * *o + v * x;
        }
        out
    }

    /// `H u`; boundary values of `u` are ignored, the result vanishes there.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if !u.grid().same_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(embed(self.grid, self.apply_interior(&interior_of(u))))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (m, n) = interior_dims(&self.grid);
        let (cx, cy) = (0.5 / self.grid.hx().powi(2), 0.5 / self.grid.hy().powi(2));
        let dim = m * n;
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..m {
            for j in 0..n {
                let p = i * n + j;
                h[(p, p)] = 2.0 * (cx + cy) + self.potential[p];
                if i + 1 < m {
                    h[(p, p + n)] = -cx;
                    h[(p + n, p)] = -cx;
                }
                if j + 1 < n {
                    h[(p, p + 1)] = -cy;
                    h[(p + 1, p)] = -cy;
                }
            }
        }
        h
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let (w, v) = eigen::symmetric_eigen(self.to_dense())?;
        Ok(Spectrum { grid: self.grid, energies: w.as_slice().to_vec(), vectors: v })
    }
}

impl Spectrum {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Grid function of eigenvector `j`, normalized for the trapezoid inner
    /// product.
    pub fn mode(&self, j: usize) -> ScalarField {
        let scale = 1.0 / (self.grid.hx() * self.grid.hy()).sqrt();
        embed(self.grid, self.vectors.column(j).iter().map(|v| v * scale))
    }

    /// `Sum_j occupation(lambda, E_j)`.
    pub fn occupied_charge(&self, lambda: f64) -> f64 {
        self.energies.iter().map(|&e| occupation(lambda, e)).sum()
    }

    /// Bisection for `occupied_charge(lambda) = z` on
    /// `[E_0, E_0 + (pi z / sqrt 2)^2]`.
    pub fn fermi_level(&self, z: f64) -> Result<f64> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::InvalidCharge(format!("target charge must be positive, got {z}")));
        }
        let e0 = *self.energies.first().ok_or_else(|| Error::InvalidGrid("no interior nodes".into()))?;
        let (mut lo, mut hi) = (e0, e0 + (PI * z / SQRT_2).powi(2));
        while hi - lo > f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.occupied_charge(mid) < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `(sqrt 2 / pi) (lambda - H)_+^(1/2)` by functional calculus.
    pub fn state(&self, lambda: f64) -> ReducedState {
        let keep: Vec<usize> = (0..self.energies.len()).filter(|&j| self.energies[j] < lambda).collect();
        ReducedState {
            grid: self.grid,
            weights: keep.iter().map(|&j| occupation(lambda, self.energies[j])).collect(),
            modes: self.vectors.select_columns(&keep),
        }
    }
}

pub fn state_from_hamiltonian(h: &DiscreteHamiltonian, lambda: f64) -> Result<ReducedState> {
    Ok(h.spectrum()?.state(lambda))
}

pub fn rhf_fermi_level(h: &DiscreteHamiltonian, z: f64) -> Result<f64> {
    h.spectrum()?.fermi_level(z)
}

/// Kinetic energy plus one half of the regularized Hartree energy of
/// `rho_G - mu`.
pub fn rhf_energy(coulomb: &Coulomb2d, state: &ReducedState, mu: &ChargeDistribution) -> Result<EnergyBreakdown> {
    let f = &density_of_state(state) - mu.field();
    let v = coulomb.potential(Interaction::Regularized, &f)?;
    Ok(EnergyBreakdown::new(kinetic_reduced(state), 0.5 * v.dot(&f)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhfConfig {
    /// Stop when two successive energies differ by less than this.
    pub epsilon: f64,
    pub max_iter: usize,
    pub mixing_samples: usize,
}

impl Default for RhfConfig {
    fn default() -> Self {
        Self { epsilon: 1e-9, max_iter: 100, mixing_samples: 11 }
    }
}

impl RhfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.mixing_samples < 2 {
            return Err(Error::InvalidConfig("mixing_samples must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RhfResult {
    pub state: ReducedState,
    pub rho: ScalarField,
    pub potential: ScalarField,
    /// Fermi level of the Hamiltonian built from `potential`.
    pub lambda: f64,
    pub energy: EnergyBreakdown,
    pub history: Vec<HistoryEntry>,
    pub converged: bool,
    pub iterations: usize,
    /// `||G - (sqrt 2/pi)(lambda - H[G])_+^(1/2)||_F / ||G||_F`.
    pub fixed_point_residual: f64,
    /// Spectrum of the final Hamiltonian, ascending.
    pub levels: Vec<f64>,
    /// Occupation of each level at `lambda`.
    pub occupations: Vec<f64>,
}

/// Energy along `(1 - t) G_a + t G_b`.
struct MixLine {
    basis: DMatrix<f64>,
    /// `diag(a, 0)` and `diag(-a, b)` so that the mixture is
    /// `basis (d0 + t d1) basis^T`.
    d0: Vec<f64>,
    d1: Vec<f64>,
    gram: DMatrix<f64>,
    laplace_a: f64,
    laplace_b: f64,
    cubic: [f64; 4],
    hartree: [f64; 3],
}

fn half_laplace_trace(state: &ReducedState) -> f64 {
    state
        .weights
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let u = state.modes.column(j);
            let lu = neg_laplacian(&state.grid, u.as_slice());
            0.5 * g * u.iter().zip(&lu).map(|(a, b)| a * b).sum::<f64>()
        })
        .sum()
}

impl MixLine {
    fn new(a: &ReducedState, b: &ReducedState, hartree: [f64; 3]) -> Self {
        let (ra, rb) = (a.rank(), b.rank());
        let mut basis = DMatrix::zeros(a.modes.nrows(), ra + rb);
        basis.columns_mut(0, ra).copy_from(&a.modes);
        basis.columns_mut(ra, rb).copy_from(&b.modes);
        let gram = basis.transpose() * &basis;
        let d0: Vec<f64> = a.weights.iter().copied().chain(std::iter::repeat(0.0).take(rb)).collect();
        let d1: Vec<f64> = a.weights.iter().map(|g| -g).chain(b.weights.iter().copied()).collect();
        let p0 = DMatrix::from_diagonal(&DVector::from_vec(d0.clone())) * &gram;
        let p1 = DMatrix::from_diagonal(&DVector::from_vec(d1.clone())) * &gram;
        let p00 = &p0 * &p0;
        let p11 = &p1 * &p1;
        let cubic = [(&p00 * &p0).trace(), 3.0 * (&p00 * &p1).trace(), 3.0 * (&p0 * &p11).trace(), (&p11 * &p1).trace()];
        Self { basis, d0, d1, gram, laplace_a: half_laplace_trace(a), laplace_b: half_laplace_trace(b), cubic, hartree }
    }

    fn at(&self, t: f64) -> EnergyBreakdown {
        let [c0, c1, c2, c3] = self.cubic;
        let cube = c0 + t * (c1 + t * (c2 + t * c3));
        let kinetic = (1.0 - t) * self.laplace_a + t * self.laplace_b + PI * PI / 6.0 * cube;
        let [h0, h1, h2] = self.hartree;
        EnergyBreakdown::new(kinetic, h0 + t * (h1 + t * h2))
    }

    /// Diagonalizes the mixture at `t` inside the span of both mode sets.
    /// Weights are rescaled so the trace is exactly that of the mixture.
    fn state(&self, grid: Grid, t: f64) -> Result<ReducedState> {
        let (sigma, y) = eigen::symmetric_eigen(self.gram.clone())?;
        let smax = sigma.max();
        let keep: Vec<usize> = (0..sigma.len()).filter(|&k| sigma[k] > OVERLAP_CUTOFF * smax).collect();
        let mut coeffs = y.select_columns(&keep);
        for (c, &k) in keep.iter().enumerate() {
            coeffs.column_mut(c).scale_mut(1.0 / sigma[k].sqrt());
        }
        let mut q = &self.basis * &coeffs;
        // One symmetric re-orthonormalization pass.
        let (s, z) = eigen::symmetric_eigen(q.transpose() * &q)?;
        let inv_sqrt = &z * DMatrix::from_diagonal(&s.map(|v| 1.0 / v.sqrt())) * z.transpose();
        q *= inv_sqrt;

        let proj = q.transpose() * &self.basis;
        let d = DVector::from_iterator(self.d0.len(), self.d0.iter().zip(&self.d1).map(|(a, b)| a + t * b));
        let small = &proj * DMatrix::from_diagonal(&d) * proj.transpose();
        let (g, w) = eigen::symmetric_eigen(small)?;
        let gmax = g.max().max(0.0);
        let keep: Vec<usize> = (0..g.len()).filter(|&k| g[k] > WEIGHT_CUTOFF * gmax).collect();
        let trace: f64 = d.iter().sum();
        let kept: f64 = keep.iter().map(|&k| g[k]).sum();
        Ok(ReducedState {
            grid,
            weights: keep.iter().map(|&k| g[k] * trace / kept).collect(),
            modes: q * w.select_columns(&keep),
        })
    }
}

/// Self-consistent iteration with energy-optimal damping on the state.
///
/// Starts from the aufbau state of the bare potential `V[-mu]`; each step
/// builds `H = -1/2 Delta_h + V[rho - mu]`, fills it to charge `Z`, and moves
/// to the energy-minimizing point of the segment between the current state
/// and the filled one. Densities mix with the same parameter.
pub fn rhf_scf(coulomb: &Coulomb2d, mu: &ChargeDistribution, cfg: &RhfConfig) -> Result<RhfResult> {
    cfg.validate()?;
    let grid = *mu.grid();
    if !coulomb.grid().same_as(&grid) {
        return Err(Error::GridMismatch);
    }
    let z = mu.charge();
    let potential = |f: &ScalarField| coulomb.potential(Interaction::Regularized, f);

    let bare = potential(&mu.field().scale(-1.0))?;
    let spectrum = assemble_hamiltonian(&bare)?.spectrum()?;
    let mut lambda = spectrum.fermi_level(z)?;
    let mut state = spectrum.state(lambda);
    let mut rho = density_of_state(&state);
    let mut f0 = &rho - mu.field();
    let mut v0 = potential(&f0)?;
    let mut energy = EnergyBreakdown::new(kinetic_reduced(&state), 0.5 * v0.dot(&f0)?);
    let mut history = vec![HistoryEntry { iter: 0, energy: energy.total, lambda, t: 0.0 }];
    let mut converged = false;
    let mut iterations = 0;
    let mut spectrum = assemble_hamiltonian(&v0)?.spectrum()?;

    while iterations < cfg.max_iter {
        lambda = spectrum.fermi_level(z)?;
        let target = spectrum.state(lambda);
        let delta = &density_of_state(&target) - &rho;
        let vd = potential(&delta)?;
        let hartree = [
            0.5 * weighted_dot(&grid, v0.values(), f0.values()),
            weighted_dot(&grid, v0.values(), delta.values()),
            0.5 * weighted_dot(&grid, vd.values(), delta.values()),
        ];
        let line = MixLine::new(&state, &target, hartree);
        let (t, _) = minimize_unit_interval(|t| line.at(t).total, cfg.mixing_samples, 1e-10);

        if t > 0.0 {
            state = if t == 1.0 { target } else { line.state(grid, t)? };
            rho = density_of_state(&state);
            f0 = &rho - mu.field();
            v0 = potential(&f0)?;
        }
        let next = EnergyBreakdown::new(kinetic_reduced(&state), 0.5 * v0.dot(&f0)?);
        iterations += 1;
        let change = (energy.total - next.total).abs();
        energy = next;
        history.push(HistoryEntry { iter: iterations, energy: energy.total, lambda, t });
        debug!("rhf scf {iterations}: E = {:.12} lambda = {lambda:.8} t = {t:.4} rank = {}", energy.total, state.rank());
        spectrum = assemble_hamiltonian(&v0)?.spectrum()?;
        if change < cfg.epsilon {
            converged = true;
            break;
        }
    }

    lambda = spectrum.fermi_level(z)?;
    let fixed = spectrum.state(lambda);
    let fixed_point_residual = if state.rank() == 0 { f64::NAN } else { relative_distance(&state, &fixed) };
    let occupations = spectrum.energies.iter().map(|&e| occupation(lambda, e)).collect();
    Ok(RhfResult {
        rho: density_of_state(&state),
        state,
        potential: v0,
        lambda,
        energy,
        history,
        converged,
        iterations,
        fixed_point_residual,
        levels: spectrum.energies,
        occupations,
    })
}

/// Relative fixed-point residual of `state` against the filled state of its
/// own mean-field Hamiltonian.
pub fn fixed_point_residual(coulomb: &Coulomb2d, state: &ReducedState, mu: &ChargeDistribution) -> Result<f64> {
    let f = &density_of_state(state) - mu.field();
    let spectrum = assemble_hamiltonian(&coulomb.potential(Interaction::Regularized, &f)?)?.spectrum()?;
    let fixed = spectrum.state(spectrum.fermi_level(mu.charge())?);
    Ok(relative_distance(state, &fixed))
}

#[cfg(test)]
mod tests;
