use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::build_grids;
use crate::linalg::gamma_fn;

fn scalar(m: f64, a: f64) -> ReducedSystem {
    ReducedSystem::from_dense(DMatrix::from_element(1, 1, m), DMatrix::from_element(1, 1, a), 1).unwrap()
}

fn diag(m: &[f64], a: &[f64], n1: usize) -> ReducedSystem {
    ReducedSystem::from_dense(
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(m)),
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(a)),
        n1,
    )
    .unwrap()
}

fn random_pair(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let c = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&b * b.transpose() + DMatrix::identity(n, n), &c * c.transpose() * 50.0)
}

#[test]
fn zero_data_stays_zero() {
    let (m, a) = random_pair(4, 1);
    let sys = ReducedSystem::from_dense(m, a, 2).unwrap();
    let kernel = L1Kernel::new(0.7, 1e-2, 20).unwrap();
    for scheme in [Scheme::Implicit, Scheme::Explicit, Scheme::Partial] {
        let out = run_scheme(scheme, &sys, &kernel, &[0.0; 4], &Forcing::Zero, "z").unwrap();
        assert_eq!(out.trajectory.steps(), 20);
        assert!(out.trajectory.states.iter().flatten().all(|&v| v == 0.0));
    }
}

#[test]
fn scalar_first_steps() {
    let lambda = 37.0;
    let kernel = L1Kernel::new(0.6, 1e-3, 5).unwrap();
    let a0 = kernel.alpha0();
    let sys = scalar(1.0, lambda);
    let hist = vec![vec![1.0]];
    let ui = step_implicit(&sys, &kernel, &hist, &[0.0]).unwrap();
    assert!((ui[0] - 1.0 / (1.0 + a0 * lambda)).abs() < 1e-15);
    let ue = step_explicit(&sys, &kernel, &hist, &[0.0]).unwrap();
    assert!((ue[0] - (1.0 - a0 * lambda)).abs() < 1e-15);
}

#[test]
fn pure_fractional_ode_is_exact_for_linear_data() {
    for alpha in [0.3, 0.5, 0.9] {
        let n = 100;
        let dt = 1.0 / n as f64;
        let kernel = L1Kernel::new(alpha, dt, n).unwrap();
        let sys = scalar(1.0, 0.0);
        let g = gamma_fn(2.0 - alpha).unwrap();
        let f = |t: f64| vec![t.powf(1.0 - alpha) / g];
        let out = run_scheme(Scheme::Implicit, &sys, &kernel, &[0.0], &Forcing::Timed(&f), "ode").unwrap();
        for (k, u) in out.trajectory.states.iter().enumerate() {
            let t = k as f64 * dt;
            assert!((u[0] - t).abs() <= 1e-10 * t.max(1e-300), "alpha {alpha}, k {k}");
        }
        let ex = run_scheme(Scheme::Explicit, &sys, &kernel, &[0.0], &Forcing::Timed(&f), "ode").unwrap();
        for (x, y) in out.trajectory.states.iter().zip(&ex.trajectory.states) {
            assert!((x[0] - y[0]).abs() <= 1e-14);
        }
    }
}

#[test]
fn explicit_at_half_stays_bounded() {
    let kernel = L1Kernel::new(0.5, 1e-3, 1000).unwrap();
    let lambda = 0.5 / kernel.alpha0();
    let out = run_scheme(Scheme::Explicit, &scalar(1.0, lambda), &kernel, &[1.0], &Forcing::Zero, "s").unwrap();
    assert!(!out.diverged());
    assert!(out.trajectory.states.iter().all(|u| u[0].abs() <= 1.0 + 1e-12));
}

#[test]
fn partial_reduces_to_the_pure_schemes() {
    let (m, a) = random_pair(5, 2);
    let kernel = L1Kernel::new(0.8, 1e-3, 15).unwrap();
    let u0 = [1.0, -0.5, 0.25, 2.0, 0.0];
    let f = Forcing::Constant(vec![0.3; 5]);
    let all1 = ReducedSystem::from_dense(m.clone(), a.clone(), 5).unwrap();
    let p = run_scheme(Scheme::Partial, &all1, &kernel, &u0, &f, "p").unwrap();
    let i = run_scheme(Scheme::Implicit, &all1, &kernel, &u0, &f, "i").unwrap();
    let all2 = ReducedSystem::from_dense(m, a, 0).unwrap();
    let p2 = run_scheme(Scheme::Partial, &all2, &kernel, &u0, &f, "p").unwrap();
    let e = run_scheme(Scheme::Explicit, &all2, &kernel, &u0, &f, "e").unwrap();
    for (x, y) in p.trajectory.states.iter().flatten().zip(i.trajectory.states.iter().flatten()) {
        assert!((x - y).abs() < 1e-10);
    }
    for (x, y) in p2.trajectory.states.iter().flatten().zip(e.trajectory.states.iter().flatten()) {
        assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0));
    }
}

#[test]
fn two_by_two_block_elimination() {
    let (a1, a2) = (3.0, 40.0);
    let sys = diag(&[1.0, 1.0], &[a1, a2], 1);
    let kernel = L1Kernel::new(0.4, 1e-2, 3).unwrap();
    let a0 = kernel.alpha0();
    let history = vec![vec![0.7, -1.2], vec![0.5, 0.9]];
    let f = [2.0, -3.0];
    let h = kernel.history_rhs(&history).unwrap();
    let u = step_partial(&sys, &kernel, &history, &f).unwrap();
    assert!((u[0] - (h[0] + a0 * f[0]) / (1.0 + a0 * a1)).abs() < 1e-14);
    assert!((u[1] - (h[1] - a0 * a2 * history[1][1] + a0 * f[1])).abs() < 1e-14);
}

#[test]
fn decoupled_blocks_run_independently() {
    let sys = diag(&[2.0, 1.0, 3.0], &[5.0, 7.0, 11.0], 1);
    let kernel = L1Kernel::new(0.5, 1e-3, 30).unwrap();
    let u0 = [1.0, 2.0, -1.0];
    let p = run_scheme(Scheme::Partial, &sys, &kernel, &u0, &Forcing::Zero, "p").unwrap();
    let b1 = run_scheme(Scheme::Implicit, &scalar(2.0, 5.0), &kernel, &[1.0], &Forcing::Zero, "1").unwrap();
    let b2 = run_scheme(Scheme::Explicit, &scalar(1.0, 7.0), &kernel, &[2.0], &Forcing::Zero, "2").unwrap();
    let b3 = run_scheme(Scheme::Explicit, &scalar(3.0, 11.0), &kernel, &[-1.0], &Forcing::Zero, "3").unwrap();
    for k in 0..=30 {
        let s = &p.trajectory.states[k];
        assert!((s[0] - b1.trajectory.states[k][0]).abs() < 1e-14);
        assert!((s[1] - b2.trajectory.states[k][0]).abs() < 1e-14);
        assert!((s[2] - b3.trajectory.states[k][0]).abs() < 1e-14);
    }
}

#[test]
fn history_work_is_quadratic() {
    let kernel = L1Kernel::new(0.5, 1e-3, 200).unwrap();
    let out = run_scheme(Scheme::Implicit, &scalar(1.0, 1.0), &kernel, &[1.0], &Forcing::Zero, "s").unwrap();
    assert_eq!(out.history_axpys, 200 * 201 / 2);
}

#[test]
fn divergence_is_an_outcome() {
    let kernel = L1Kernel::new(0.5, 1e-3, 1000).unwrap();
    let lambda = 2.0 / kernel.alpha0();
    let out = run_scheme(Scheme::Explicit, &scalar(1.0, lambda), &kernel, &[1.0], &Forcing::Zero, "s").unwrap();
    let k = out.diverged_at.expect("guard should fire");
    assert_eq!(out.trajectory.steps(), k);
    assert!(out.trajectory.last()[0].abs() > DIVERGENCE_FACTOR);
}

#[test]
fn fine_reference_matches_implicit_run() {
    let g = build_grids(2, 3).unwrap();
    let k = PermeabilityField::new(g.fine_n(), (0..g.n_cells()).map(|c| 1.0 + (c % 3) as f64).collect()).unwrap();
    let src = |x: f64, y: f64, _t: f64| x * (1.0 - y);
    let f = Forcing::Constant(load_vector(&g, &src, 0.0));
    let u0 = vec![0.0; g.n_dofs()];
    let fine = fine_reference(&g, &k, 0.7, 1e-3, 10, &f, &u0).unwrap();
    let a = assemble(&g, Weight::Stiffness(&k)).unwrap();
    let m = assemble(&g, Weight::Mass).unwrap();
    let sys = ReducedSystem::fine(a, m).unwrap();
    let kernel = L1Kernel::new(0.7, 1e-3, 10).unwrap();
    let run = run_scheme(Scheme::Implicit, &sys, &kernel, &u0, &f, "fine").unwrap();
    assert_eq!(fine.trajectory, run.trajectory);
    let zero = fine_reference(&g, &k, 0.7, 1e-3, 10, &Forcing::Zero, &u0).unwrap();
    assert!(zero.trajectory.states.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn explicit_fine_grid_diverges_at_high_contrast() {
    let g = build_grids(3, 10).unwrap();
    let n = g.fine_n();
    let vals = (0..n * n).map(|c| if (c / n) % 6 == 2 { 1e5 } else { 1.0 }).collect();
    let k = PermeabilityField::new(n, vals).unwrap();
    let a = assemble(&g, Weight::Stiffness(&k)).unwrap();
    let m = assemble(&g, Weight::Mass).unwrap();
    let sys = ReducedSystem::fine(a, m).unwrap();
    let kernel = L1Kernel::new(0.9, 2e-5, 500).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u0: Vec<f64> = (0..g.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let out = run_scheme(Scheme::Explicit, &sys, &kernel, &u0, &Forcing::Zero, "fine").unwrap();
    assert!(out.diverged());
}

#[test]
fn l2_projection_on_identity_basis_is_identity() {
    let g = build_grids(2, 2).unwrap();
    let m = assemble(&g, Weight::Mass).unwrap();
    let sys = ReducedSystem::fine(m.clone(), m.clone()).unwrap();
    let u: Vec<f64> = (0..g.n_dofs()).map(|i| i as f64).collect();
    assert_eq!(sys.l2_project(&m, &u).unwrap(), u);
}

#[test]
fn singular_partial_matrix_reported() {
    let sys = ReducedSystem::from_dense(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), 1).unwrap();
    let kernel = L1Kernel::new(0.5, 1e-3, 2).unwrap();
    assert!(Stepper::new(Scheme::Partial, &sys, &kernel).is_err());
}

proptest! {
    // One step from u⁰ with M = I: the two schemes differ by
    // (α₀A)²(I + α₀A)⁻¹u⁰.
    #[test]
    fn implicit_and_explicit_agree_to_second_order(seed in 0u64..500, dt in 1e-6f64..1e-3) {
        let (_, a) = random_pair(4, seed);
        let sys = ReducedSystem::from_dense(DMatrix::identity(4, 4), a.clone(), 4).unwrap();
        let kernel = L1Kernel::new(0.5, dt, 1).unwrap();
        let u0 = vec![1.0, -1.0, 0.5, 0.25];
        let ui = step_implicit(&sys, &kernel, &[u0.clone()], &[0.0; 4]).unwrap();
        let ue = step_explicit(&sys, &kernel, &[u0.clone()], &[0.0; 4]).unwrap();
        let diff: Vec<f64> = ui.iter().zip(&ue).map(|(x, y)| x - y).collect();
        let an = a.norm();
        let a0 = kernel.alpha0();
        prop_assert!(norm2(&diff) <= 2.0 * a0 * a0 * an * an * norm2(&u0) + 1e-15);
    }
}
