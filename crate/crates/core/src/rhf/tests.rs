use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::charge::ChargeSpec;
use crate::coulomb::SelfInteraction;
use crate::field::integrate;

fn grid(a: f64, n: usize) -> Grid {
    Grid::new(a, a, n, n).unwrap()
}

/// Lowest eigenvalue of `-1/2 Delta_h` with Dirichlet data on `[-a, a]^2`.
fn discrete_box_ground(a: f64, n: usize) -> f64 {
    let h = 2.0 * a / (n - 1) as f64;
    let one_d = 4.0 / (h * h) * (PI / (2.0 * (n - 1) as f64)).sin().powi(2);
    0.5 * 2.0 * one_d
}

fn random_state(g: Grid, rank: usize, rng: &mut ChaCha8Rng) -> ReducedState {
    let n = interior_len(&g);
    let raw = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    let q = raw.qr().q();
    let weights = (0..rank).map(|_| rng.random_range(0.1..1.0)).collect();
    ReducedState { grid: g, weights, modes: q }
}

#[test]
fn box_ground_state_matches_oracle_and_converges() {
    let mut errors = Vec::new();
    for n in [11, 21, 41] {
        let g = grid(2.0, n);
        let spec = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap().spectrum().unwrap();
        let e0 = spec.energies()[0];
        assert!((e0 - discrete_box_ground(2.0, n)).abs() < 1e-10 * e0);
        let continuum = 0.5 * 2.0 * (PI / 4.0).powi(2);
        errors.push((e0 - continuum).abs());
    }
    assert!(errors[1] < errors[0] / 3.5 && errors[2] < errors[1] / 3.5, "{errors:?}");
}

#[test]
fn constant_potential_shifts_spectrum() {
    let g = grid(3.0, 15);
    let base = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap().spectrum().unwrap();
    let shifted = assemble_hamiltonian(&ScalarField::constant(g, -2.75)).unwrap().spectrum().unwrap();
    for (a, b) in base.energies().iter().zip(shifted.energies()) {
        assert!((b - (a - 2.75)).abs() < 1e-10);
    }
}

#[test]
fn hamiltonian_is_symmetric() {
    let g = Grid::new(3.0, 2.0, 17, 13).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = ScalarField::from_fn(g, |x, y| (x * y).sin() - 0.3 * x);
    let h = assemble_hamiltonian(&v).unwrap();
    let random = |rng: &mut ChaCha8Rng| {
        let vals = (0..g.len())
            .map(|k| {
                let (i, j) = g.coords(k);
                if g.is_boundary(i, j) {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        ScalarField::new(g, vals).unwrap()
    };
    for _ in 0..10 {
        let (u, w) = (random(&mut rng), random(&mut rng));
        let lhs = h.apply(&u).unwrap().dot(&w).unwrap();
        let rhs = u.dot(&h.apply(&w).unwrap()).unwrap();
        let scale = u.dot(&u).unwrap().sqrt() * w.dot(&w).unwrap().sqrt();
        assert!((lhs - rhs).abs() <= 1e-12 * scale * h.to_dense().abs().max());
    }
    let dense = h.to_dense();
    assert_eq!(dense, dense.transpose());
}

#[test]
fn functional_calculus_closed_forms() {
    let g = grid(2.0, 21);
    let h = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap();
    let spec = h.spectrum().unwrap();
    let e = spec.energies();
    assert_eq!(spec.state(e[0]).rank(), 0);
    assert_eq!(spec.state(e[0] - 1.0).trace(), 0.0);
    let lambda = 0.5 * (e[0] + e[1]);
    let state = state_from_hamiltonian(&h, lambda).unwrap();
    assert_eq!(state.rank(), 1);
    let e0 = discrete_box_ground(2.0, 21);
    assert!((state.trace() - SQRT_2 / PI * (lambda - e0).sqrt()).abs() < 1e-10);
}

#[test]
fn fermi_level_closed_forms() {
    let g = grid(2.0, 21);
    let h = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap();
    let spec = h.spectrum().unwrap();
    let (e0, e1) = (spec.energies()[0], spec.energies()[1]);
    let z = 0.5 * (e1 - e0).sqrt() * SQRT_2 / PI;
    let lambda = rhf_fermi_level(&h, z).unwrap();
    assert!((lambda - e0 - (PI * z / SQRT_2).powi(2)).abs() < 1e-10 * lambda.abs().max(1.0));
    let tiny = spec.fermi_level(1e-9).unwrap();
    assert!((tiny - e0).abs() < 1e-12);

    // Degenerate pair: each mode carries z / 2.
    let pair = Spectrum { grid: g, energies: vec![1.0, 1.0, 50.0], vectors: DMatrix::identity(3, 3) };
    let z = 1.0;
    let lambda = pair.fermi_level(z).unwrap();
    assert!((lambda - 1.0 - (PI * z / (2.0 * SQRT_2)).powi(2)).abs() < 1e-12);
    assert!(spec.fermi_level(0.0).is_err());
}

#[test]
fn density_integrates_to_trace() {
    let g = grid(3.0, 19);
    assert_eq!(density_of_state(&ReducedState::zero(g)).max_abs(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut one = random_state(g, 1, &mut rng);
    one.weights[0] = 2.0;
    assert!((integrate(&density_of_state(&one)) - 2.0).abs() < 1e-12);
    let five = random_state(g, 5, &mut rng);
    let rho = density_of_state(&five);
    assert!(rho.min() >= 0.0);
    assert!((integrate(&rho) - five.trace()).abs() < 1e-10 * five.trace());
}

#[test]
fn from_modes_validates() {
    let g = grid(2.0, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_state(g, 3, &mut rng);
    let modes: Vec<ScalarField> = (0..3).map(|j| s.mode(j)).collect();
    let rebuilt = ReducedState::from_modes(g, s.weights(), &modes).unwrap();
    assert!((rebuilt.modes.clone() - &s.modes).abs().max() < 1e-15);
    let skewed = vec![modes[0].clone(), modes[0].clone()];
    assert!(ReducedState::from_modes(g, &[1.0, 1.0], &skewed).is_err());
    assert!(ReducedState::from_modes(g, &[-1.0], &modes[..1]).is_err());
    assert!(ReducedState::from_modes(g, &[1.0], &[ScalarField::constant(g, 1.0)]).is_err());
    assert_eq!(ReducedState::from_modes(g, &[0.0, 1.0], &modes[..2]).unwrap().rank(), 1);
}

#[test]
fn reduced_kinetic_closed_forms() {
    let g = grid(2.0, 21);
    assert_eq!(kinetic_reduced(&ReducedState::zero(g)), 0.0);
    let spec = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap().spectrum().unwrap();
    let e = spec.energies();
    let mut ground = spec.state(0.5 * (e[0] + e[1]));
    ground.weights[0] = 1.0;
    let k1 = kinetic_reduced(&ground);
    assert!((k1 - (e[0] + PI * PI / 6.0)).abs() < 1e-10, "{k1} {} {:?}", e[0], ground.weights);
    ground.weights[0] = 2.0;
    let k2 = kinetic_reduced(&ground);
    assert!(((k2 - 2.0 * e[0]) - 8.0 * PI * PI / 6.0).abs() < 1e-10);
}

#[test]
fn fiber_quadrature_reproduces_reduced_kinetic() {
    let g = grid(2.0, 15);
    assert_eq!(kinetic_fiber_quadrature(&ReducedState::zero(g), 1000).unwrap(), 0.0);
    assert!(kinetic_fiber_quadrature(&ReducedState::zero(g), 10).is_err());
    let spec = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap().spectrum().unwrap();
    let mut ground = spec.state(0.5 * (spec.energies()[0] + spec.energies()[1]));
    ground.weights[0] = 1.0;
    let k_part = kinetic_fiber_quadrature(&ground, 10_000).unwrap() - spec.energies()[0];
    assert!((k_part - PI * PI / 6.0).abs() < 1e-4, "{k_part}");

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5 {
        let s = random_state(g, 3, &mut rng);
        let fiber = kinetic_fiber_quadrature(&s, 10_000).unwrap();
        let exact = kinetic_reduced(&s);
        assert!((fiber - exact).abs() < 1e-3 * exact, "{fiber} vs {exact}");
    }
}

fn k_bins(kmax: f64, n: usize) -> Vec<f64> {
    let dk = 2.0 * kmax / n as f64;
    (0..n).map(|i| -kmax + (i as f64 + 0.5) * dk).collect()
}

#[test]
fn bathtub_fills_the_smallest_momenta() {
    let ks = k_bins(2.0 * PI, 4000);
    let dk = ks[1] - ks[0];
    assert!(bathtub_oracle(0.0, &ks).unwrap().iter().all(|m| *m == 0.0));
    let m = bathtub_oracle(1.0, &ks).unwrap();
    let off: usize = m
        .iter()
        .zip(&ks)
        .filter(|(m, k)| (**m - if k.abs() < PI { 1.0 } else { 0.0 }).abs() > 1e-12)
        .count();
    assert!(off <= 2, "{off} bins differ from the indicator");
    let obj = bathtub_objective(&m, &ks);
    assert!((obj - 2.0 * PI.powi(3) / 3.0).abs() < 2.0 * PI * PI * dk);
    assert!(bathtub_oracle(3.0, &ks).is_err());
    assert!(bathtub_oracle(-1.0, &ks).is_err());
}

#[test]
fn bathtub_dominates_random_profiles() {
    let ks = k_bins(2.0 * PI, 200);
    let dk = ks[1] - ks[0];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for g in [0.3, 1.0, 1.7] {
        let best = bathtub_objective(&bathtub_oracle(g, &ks).unwrap(), &ks);
        for _ in 0..100 {
            let mut m: Vec<f64> = ks.iter().map(|_| rng.random_range(0.0..1.0)).collect();
            // Rescale to the constraint, clipping at one and spilling the rest.
            let target = 2.0 * PI * g;
            for _ in 0..100 {
                let mass: f64 = m.iter().sum::<f64>() * dk;
                let free: f64 = m.iter().filter(|v| **v < 1.0).sum::<f64>() * dk;
                if (mass - target).abs() < 1e-12 * target {
                    break;
                }
                let s = (free + target - mass) / free;
                m.iter_mut().filter(|v| **v < 1.0).for_each(|v| *v = (*v * s).min(1.0));
            }
            assert!((m.iter().sum::<f64>() * dk - target).abs() < 1e-9);
            assert!(bathtub_objective(&m, &ks) >= best - 1e-12);
        }
    }
}

#[test]
fn rhf_energy_terms() {
    let g = grid(4.0, 21);
    let c = Coulomb2d::new(g, SelfInteraction::CellAverage).unwrap();
    let mu = ChargeSpec::gaussian(0.0, 0.0, 0.8, 1.0).sample(g).unwrap();
    let empty = rhf_energy(&c, &ReducedState::zero(g), &mu).unwrap();
    assert_eq!(empty.kinetic, 0.0);
    let d = c.potential(Interaction::Regularized, mu.field()).unwrap().dot(mu.field()).unwrap();
    assert!((empty.hartree - 0.5 * d).abs() < 1e-12 * d.abs());

    // Independent dense recomputation of every term.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = random_state(g, 4, &mut rng);
    let e = rhf_energy(&c, &s, &mu).unwrap();
    let u = &s.modes;
    let gm = u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s.weights.clone())) * u.transpose();
    let lap = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap().to_dense();
    let cube = (&gm * &gm * &gm).trace();
    let kinetic = (&lap * &gm).trace() + PI * PI / 6.0 * cube;
    assert!((e.kinetic - kinetic).abs() < 1e-10 * kinetic);
    let f = &density_of_state(&s) - mu.field();
    let hartree = 0.5 * c.hartree_energy(&f, &f).unwrap();
    assert!((e.hartree - hartree).abs() < 1e-10 * hartree.abs().max(1e-12));
    assert!((e.total - kinetic - hartree).abs() < 1e-9);
}

#[test]
fn mixing_line_matches_direct_energy() {
    let g = grid(3.0, 15);
    let c = Coulomb2d::new(g, SelfInteraction::CellAverage).unwrap();
    let mu = ChargeSpec::gaussian(0.0, 0.0, 0.6, 1.0).sample(g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut a = random_state(g, 3, &mut rng);
    let mut b = random_state(g, 4, &mut rng);
    // Share one mode so the union is rank deficient.
    b.modes.set_column(0, &a.modes.column(1).clone_owned());
    let qr = b.modes.clone().qr().q();
    b.modes = qr;
    // Both traces equal the background charge, so every field below is neutral.
    let (za, zb) = (a.trace(), b.trace());
    a.weights.iter_mut().for_each(|w| *w *= mu.charge() / za);
    b.weights.iter_mut().for_each(|w| *w *= mu.charge() / zb);
    let (ra, rb) = (density_of_state(&a), density_of_state(&b));
    let (fa, delta) = (&ra - mu.field(), &rb - &ra);
    let (va, vd) = (
        c.potential(Interaction::Regularized, &fa).unwrap(),
        c.potential(Interaction::Regularized, &delta).unwrap(),
    );
    let hartree = [
        0.5 * va.dot(&fa).unwrap(),
        va.dot(&delta).unwrap(),
        0.5 * vd.dot(&delta).unwrap(),
    ];
    let line = MixLine::new(&a, &b, hartree);
    for t in [0.0, 0.2, 0.5, 0.9, 1.0] {
        let mixed = line.state(g, t).unwrap();
        let direct = rhf_energy(&c, &mixed, &mu).unwrap();
        let predicted = line.at(t);
        assert!((direct.total - predicted.total).abs() < 1e-9 * direct.total.abs(), "t = {t} {direct:?} {predicted:?}");
        assert!((mixed.trace() - ((1.0 - t) * a.trace() + t * b.trace())).abs() < 1e-11);
        let gram = mixed.modes.transpose() * &mixed.modes;
        assert!((gram - DMatrix::identity(mixed.rank(), mixed.rank())).abs().max() < 1e-10);
    }
    assert_eq!(relative_distance(&a, &a), 0.0);
}

fn gaussian_problem(n: usize) -> (Coulomb2d, ChargeDistribution) {
    let g = grid(4.0, n);
    let c = Coulomb2d::new(g, SelfInteraction::CellAverage).unwrap();
    let mu = ChargeSpec::gaussian(0.0, 0.0, 0.5, 1.0).sample(g).unwrap();
    (c, mu)
}

#[test]
fn scf_reaches_fixed_point() {
    let (c, mu) = gaussian_problem(21);
    let cfg = RhfConfig { epsilon: 1e-11, ..RhfConfig::default() };
    let r = rhf_scf(&c, &mu, &cfg).unwrap();
    assert!(r.converged);
    assert!(r.fixed_point_residual < 1e-4, "residual {}", r.fixed_point_residual);
    assert!((r.state.trace() - mu.charge()).abs() < 1e-6 * mu.charge());
    assert!((integrate(&r.rho) - mu.charge()).abs() < 1e-6 * mu.charge(), "{} {}", integrate(&r.rho), mu.charge());
    for w in r.history.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-12);
    }
    let recomputed = rhf_energy(&c, &r.state, &mu).unwrap();
    assert!((recomputed.total - r.energy.total).abs() < 1e-9 * r.energy.total.abs(), "{recomputed:?} {:?}", r.energy);
    let independent = fixed_point_residual(&c, &r.state, &mu).unwrap();
    assert!((independent - r.fixed_point_residual).abs() < 1e-8);

    // Variational consistency against admissible perturbations of equal trace.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let mut other = random_state(*mu.grid(), 3, &mut rng);
        let scale = mu.charge() / other.trace();
        other.weights.iter_mut().for_each(|w| *w *= scale);
        let s = rng.random_range(0.01..0.2);
        let line = MixLine::new(&r.state, &other, [0.0; 3]);
        let mixed = line.state(*mu.grid(), s).unwrap();
        let e = rhf_energy(&c, &mixed, &mu).unwrap().total;
        assert!(e >= r.energy.total - 1e-10, "{e} < {}", r.energy.total);
    }
}

#[test]
fn max_iter_zero_returns_initial_state() {
    let (c, mu) = gaussian_problem(15);
    let r = rhf_scf(&c, &mu, &RhfConfig { max_iter: 0, ..RhfConfig::default() }).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 0);
    assert_eq!(r.history.len(), 1);
    let bare = c.potential(Interaction::Regularized, &mu.field().scale(-1.0)).unwrap();
    let spec = assemble_hamiltonian(&bare).unwrap().spectrum().unwrap();
    let initial = spec.state(spec.fermi_level(mu.charge()).unwrap());
    assert!(relative_distance(&initial, &r.state) < 1e-6);
}

#[test]
fn lieb_thirring_ratio() {
    assert_eq!(lieb_thirring_diagnostic(&ReducedState::zero(grid(2.0, 9))), 0.0);
    let ratio = |n: usize| {
        let g = grid(2.0, n);
        let spec = assemble_hamiltonian(&ScalarField::zeros(g)).unwrap().spectrum().unwrap();
        let mut s = spec.state(0.5 * (spec.energies()[0] + spec.energies()[1]));
        s.weights[0] = 1.0;
        lieb_thirring_diagnostic(&s)
    };
    let (coarse, fine) = (ratio(21), ratio(41));
    assert!(coarse > 0.0 && coarse.is_finite());
    assert!((coarse - fine).abs() < 0.2 * fine, "{coarse} {fine}");
}


