//! Reduced kinetic energy and its fiber representation.

use std::f64::consts::PI;

use super::{density_of_state, neg_laplacian, ReducedState};
use crate::error::{Error, Result};
use crate::field::integrate;

fn laplace_expectations(state: &ReducedState) -> Vec<f64> {
    let modes = state.interior_modes();
    (0..state.rank())
        .map(|j| {
            let u = modes.column(j);
            let lu = neg_laplacian(state.grid(), u.as_slice());
            u.iter().zip(&lu).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// `1/2 Tr(-Delta G) + (pi^2/6) Tr(G^3)`.
pub fn kinetic_reduced(state: &ReducedState) -> f64 {
    let lap = laplace_expectations(state);
    state
        .weights()
        .iter()
        .zip(&lap)
        .map(|(g, l)| 0.5 * g * l + PI * PI / 6.0 * g.powi(3))
        .sum()
}

/// `(1/4pi) int Tr((-Delta + k^2) gamma_k) dk` for the fibers
/// `gamma_k = sum_j 1{|k| <= pi g_j} |phi_j><phi_j|`, by the midpoint rule
/// with `k_nodes` points on `[-pi max g, pi max g]`.
pub fn kinetic_fiber_quadrature(state: &ReducedState, k_nodes: usize) -> Result<f64> {
    if k_nodes < 100 {
        return Err(Error::InvalidConfig(format!("k_nodes must be at least 100, got {k_nodes}")));
    }
    let gmax = state.weights().iter().cloned().fold(0.0, f64::max);
    if gmax == 0.0 {
        return Ok(0.0);
    }
    let lap = laplace_expectations(state);
    let kmax = PI * gmax;
    let dk = 2.0 * kmax / k_nodes as f64;
    let mut total = 0.0;
    for n in 0..k_nodes {
        let k = -kmax + (n as f64 + 0.5) * dk;
        let fiber: f64 = state
            .weights()
            .iter()
            .zip(&lap)
            .filter(|(g, _)| k.abs() <= PI * **g)
            .map(|(_, l)| l + k * k)
            .sum();
        total += fiber * dk;
    }
    Ok(total / (4.0 * PI))
}

/// Minimizer of `int k^2 m(k) dk` over `0 <= m <= 1`, `int m = 2 pi g`,
/// discretized on uniformly spaced bin centres `k_grid`: bins are filled in
/// order of increasing `k^2`, the last one partially.
pub fn bathtub_oracle(g: f64, k_grid: &[f64]) -> Result<Vec<f64>> {
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::Infeasible(format!("occupation must be nonnegative, got {g}")));
    }
    if k_grid.len() < 2 {
        return Err(Error::Infeasible("k grid needs at least two bins".into()));
    }
    let dk = k_grid[1] - k_grid[0];
    let target = 2.0 * PI * g;
    if target > dk * k_grid.len() as f64 * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!("mass {target} exceeds the k-grid measure")));
    }
    let mut order: Vec<usize> = (0..k_grid.len()).collect();
    order.sort_by(|&a, &b| k_grid[a].abs().total_cmp(&k_grid[b].abs()));
    let mut profile = vec![0.0; k_grid.len()];
    let mut left = target;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let fill = (left / dk).min(1.0);
        profile[i] = fill;
        left -= fill * dk;
    }
    Ok(profile)
}

/// `sum k^2 m(k) dk` on a uniform bin grid.
pub fn bathtub_objective(profile: &[f64], k_grid: &[f64]) -> f64 {
    let dk = k_grid[1] - k_grid[0];
    profile.iter().zip(k_grid).map(|(m, k)| k * k * m * dk).sum()
}

/// `int rho_G^(5/3) / kinetic_reduced(G)`, zero for the zero state.
pub fn lieb_thirring_diagnostic(state: &ReducedState) -> f64 {
    let t = kinetic_reduced(state);
    if state.rank() == 0 || t == 0.0 {
        return 0.0;
    }
    integrate(&density_of_state(state).map(|r| r.powf(5.0 / 3.0))) / t
}
