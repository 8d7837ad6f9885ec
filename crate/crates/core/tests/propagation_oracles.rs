mod common;

use common::{c, dense_step, max_diff, random_state, random_system};
use krotov_core::model::build_sodium_system;
use krotov_core::units::fs_to_au;
use krotov_core::{
    propagate, propagate_inhomogeneous, Backend, Direction, FieldSampling, LevelSystem, Propagator,
    PropagatorConfig, Pulse, State, StateTrajectory, SubspaceProjector, TimeGrid,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(backend: Backend, sampling: FieldSampling) -> PropagatorConfig {
    PropagatorConfig {
        backend,
        sampling,
        ..Default::default()
    }
}

const BACKENDS: [Backend; 2] = [Backend::Chebyshev, Backend::Eigen];

fn random_pulse(rng: &mut ChaCha8Rng, grid: TimeGrid) -> Pulse {
    let a = rng.gen_range(0.005..0.05);
    let w = rng.gen_range(0.01..0.2);
    let phi = rng.gen_range(0.0..6.0);
    let t = grid.t_final();
    Pulse::from_fn(grid, |s| {
        a * (std::f64::consts::PI * s / t).sin().powi(2) * (w * s + phi).cos()
    })
}

#[test]
fn matches_dense_exponential_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..12 {
        let dim = 2 + case % 7;
        let sys = random_system(&mut rng, dim);
        let grid = TimeGrid::new(rng.gen_range(50.0..400.0), 200).unwrap();
        let pulse = random_pulse(&mut rng, grid);
        let psi0 = random_state(&mut rng, dim);
        for sampling in [FieldSampling::Left, FieldSampling::Midpoint, FieldSampling::Right] {
            let mut reference = psi0.clone();
            let mut worst: f64 = 0.0;
            let trajs: Vec<StateTrajectory> = BACKENDS
                .iter()
                .map(|&b| {
                    Propagator::new(&sys, config(b, sampling))
                        .propagate(&pulse, &psi0, Direction::Forward)
                        .unwrap()
                })
                .collect();
            for i in 0..grid.steps() {
                let e = sampling.step_value(pulse.values(), i);
                reference = dense_step(&sys, e, grid.dt()) * reference;
                for t in &trajs {
                    worst = worst.max(max_diff(t.state(i + 1), &reference));
                }
            }
            assert!(worst <= 1e-8, "case {case} {sampling:?}: {worst:e}");
        }
    }
}

#[test]
fn single_steps_match_dense_exponential_for_long_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let dim = rng.gen_range(2..9);
        let sys = random_system(&mut rng, dim);
        let eps = rng.gen_range(-0.1..0.1);
        let dt = rng.gen_range(-300.0..300.0);
        let psi = random_state(&mut rng, dim);
        let reference = dense_step(&sys, eps, dt) * &psi;
        for b in BACKENDS {
            let p = Propagator::new(&sys, config(b, FieldSampling::Left));
            let out = p.step(eps, dt, &psi, 0).unwrap();
            assert!(max_diff(&out, &reference) < 1e-10, "{b:?} dt={dt}");
        }
    }
}

#[test]
fn stationary_state_acquires_phase() {
    let na = build_sodium_system().unwrap();
    let grid = TimeGrid::new(fs_to_au(200.0), 4096).unwrap();
    let pulse = Pulse::zeros(grid);
    let k = na.index_of("4s").unwrap();
    let e = na.energies()[k];
    for b in BACKENDS {
        let traj = Propagator::new(&na, config(b, FieldSampling::Midpoint))
            .propagate(&pulse, &na.basis_state(k), Direction::Forward)
            .unwrap();
        let expected = na.basis_state(k) * Complex64::from_polar(1.0, -e * grid.t_final());
        let err = max_diff(traj.final_state(), &expected);
        assert!(err <= 1e-10, "{b:?}: {err:e}");
    }
}

#[test]
fn norm_is_conserved() {
    let na = build_sodium_system().unwrap();
    let grid = TimeGrid::new(fs_to_au(400.0), 4096).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pulse = Pulse::from_fn(grid, |t| {
        0.004 * (std::f64::consts::PI * t / grid.t_final()).sin().powi(2) * (0.0586 * t).cos()
    });
    let psi0 = random_state(&mut rng, 8);
    for b in BACKENDS {
        let traj = Propagator::new(&na, config(b, FieldSampling::Left))
            .propagate(&pulse, &psi0, Direction::Forward)
            .unwrap();
        let drift = traj
            .states()
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 1e-10, "{b:?}: {drift:e}");
    }
}

#[test]
fn forward_then_backward_returns_initial_state() {
    let na = build_sodium_system().unwrap();
    let grid = TimeGrid::new(fs_to_au(300.0), 2048).unwrap();
    let pulse = Pulse::from_fn(grid, |t| {
        0.003 * (std::f64::consts::PI * t / grid.t_final()).sin().powi(2) * (0.0586 * t).cos()
    });
    let psi0 = na.basis_state(0);
    for b in BACKENDS {
        for s in [FieldSampling::Left, FieldSampling::Midpoint] {
            let p = Propagator::new(&na, config(b, s));
            let fw = p.propagate(&pulse, &psi0, Direction::Forward).unwrap();
            let bw = p.propagate(&pulse, fw.final_state(), Direction::Backward).unwrap();
            assert!(max_diff(bw.initial(), &psi0) <= 1e-8, "{b:?} {s:?}");
        }
    }
}

/// Degenerate two-level system `H = eps(t) sigma_x`: the propagators at
/// different times commute, so `psi(T) = cos A |0> - i sin A |1>` with
/// `A = int eps dt`.
#[test]
fn resonant_pi_pulse_inverts_population() {
    let mut d = DMatrix::zeros(2, 2);
    d[(0, 1)] = 1.0;
    d[(1, 0)] = 1.0;
    let sys = LevelSystem::new(vec!["a".into(), "b".into()], vec![0.0, 0.0], d).unwrap();
    let t = 1000.0;
    let grid = TimeGrid::new(t, 2001).unwrap();
    // sin^2 envelope with area pi/2 gives a full pi rotation of the Bloch vector
    let amp = std::f64::consts::PI / t;
    let pulse = Pulse::from_fn(grid, |s| amp * (std::f64::consts::PI * s / t).sin().powi(2));
    let traj = Propagator::new(&sys, config(Backend::Chebyshev, FieldSampling::Midpoint))
        .propagate(&pulse, &sys.basis_state(0), Direction::Forward)
        .unwrap();
    for (i, s) in traj.states().iter().enumerate().step_by(50) {
        let ti = grid.t(i);
        let area = amp * (ti / 2.0 - t / (4.0 * std::f64::consts::PI) * (2.0 * std::f64::consts::PI * ti / t).sin());
        let expected = DVector::from_vec(vec![c(area.cos(), 0.0), c(0.0, -area.sin())]);
        assert!(max_diff(s, &expected) <= 1e-6, "t={ti}");
    }
    assert!((traj.populations(grid.len() - 1)[1] - 1.0).abs() <= 1e-6);
}

fn free_system(energies: Vec<f64>) -> LevelSystem {
    let n = energies.len();
    let labels = (0..n).map(|i| format!("l{i}")).collect();
    LevelSystem::new(labels, energies, DMatrix::zeros(n, n)).unwrap()
}

#[test]
fn inhomogeneous_constant_source_without_hamiltonian() {
    let sys = free_system(vec![0.0, 0.0, 0.0]);
    let t = 10.0;
    let w = 0.7;
    let psi0 = DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]);
    for n in [11, 101] {
        let grid = TimeGrid::new(t, n).unwrap();
        let pulse = Pulse::zeros(grid);
        let source = StateTrajectory::new(grid, vec![psi0.clone(); n]).unwrap();
        let seed = State::zeros(3);
        for b in BACKENDS {
            let p = Propagator::new(&sys, config(b, FieldSampling::Left));
            let chi = p
                .propagate_inhomogeneous(&pulse, &seed, &source, &SubspaceProjector::identity(3), w)
                .unwrap();
            for i in 0..n {
                let expected = &psi0 * c(-w * (t - grid.t(i)), 0.0);
                assert!(max_diff(chi.state(i), &expected) < 1e-13, "{b:?} n={n} i={i}");
            }
        }
    }
}

/// Free evolution with a diagonal projector: the exact adjoint is
/// `chi(t) = e^{-iH(t-T)} chi(T) - w (T - t) e^{-iHt} P psi0`.
#[test]
fn inhomogeneous_second_order_against_analytic_solution() {
    let energies = vec![0.0, 0.05, 0.13];
    let sys = free_system(energies.clone());
    let t = 200.0;
    let w = -0.01;
    let psi0 = DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.48), c(0.64, 0.0)]);
    let seed = DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let projector = SubspaceProjector::new(3, [0, 2]).unwrap();
    let mut errors = Vec::new();
    for n in [65, 129, 257, 513] {
        let grid = TimeGrid::new(t, n).unwrap();
        let pulse = Pulse::zeros(grid);
        let source = propagate(&sys, &pulse, &psi0, &grid, Direction::Forward).unwrap();
        let chi = propagate_inhomogeneous(&sys, &pulse, &seed, &source, &projector, w, &grid).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..n {
            let ti = grid.t(i);
            let expected = DVector::from_fn(3, |l, _| {
                let back = Complex64::from_polar(1.0, -energies[l] * (ti - t)) * seed[l];
                let p = if projector.members().contains(&l) { psi0[l] } else { c(0.0, 0.0) };
                back - Complex64::from_polar(1.0, -energies[l] * ti) * p * (w * (t - ti))
            });
            err = err.max(max_diff(chi.state(i), &expected));
        }
        errors.push(err);
    }
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(order >= 1.9, "errors {errors:?}");
    }
}

/// Coupled system with a field, reference by Richardson extrapolation.
#[test]
fn inhomogeneous_converges_under_grid_halving() {
    let na = build_sodium_system().unwrap();
    let t = fs_to_au(100.0);
    let w = -1.0 / t;
    let projector = SubspaceProjector::from_labels(&na, &["3s", "4s"]).unwrap();
    let field = |s: f64| 0.002 * (std::f64::consts::PI * s / t).sin().powi(2) * (0.0586 * s).cos();
    let seed = na.basis_state(na.index_of("4s").unwrap());
    let solve = |n: usize| -> State {
        let grid = TimeGrid::new(t, n).unwrap();
        let pulse = Pulse::from_fn(grid, field);
        let p = Propagator::new(&na, config(Backend::Chebyshev, FieldSampling::Midpoint));
        let source = p.propagate(&pulse, &na.basis_state(0), Direction::Forward).unwrap();
        p.propagate_inhomogeneous(&pulse, &seed, &source, &projector, w)
            .unwrap()
            .initial()
            .clone()
    };
    let sols: Vec<State> = [513, 1025, 2049, 4097].iter().map(|&n| solve(n)).collect();
    // second-order Richardson extrapolation from the two finest grids
    let reference = (&sols[3] * c(4.0, 0.0) - &sols[2]) / c(3.0, 0.0);
    let errs: Vec<f64> = sols[..3].iter().map(|s| max_diff(s, &reference)).collect();
    for pair in errs.windows(2) {
        assert!(pair[0] / pair[1] >= 1.9, "errors {errs:?}");
    }
}

#[test]
fn inhomogeneous_homogeneous_limit_and_linearity() {
    let na = build_sodium_system().unwrap();
    let grid = TimeGrid::new(fs_to_au(80.0), 1024).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pulse = random_pulse(&mut rng, grid);
    let source = propagate(&na, &pulse, &na.basis_state(0), &grid, Direction::Forward).unwrap();
    let projector = SubspaceProjector::from_labels(&na, &["3s", "4s", "7p"]).unwrap();
    let seed = random_state(&mut rng, 8);
    let zero = State::zeros(8);
    for b in BACKENDS {
        let p = Propagator::new(&na, config(b, FieldSampling::Left));
        let plain = p.propagate(&pulse, &seed, Direction::Backward).unwrap();
        let inh = p.propagate_inhomogeneous(&pulse, &seed, &source, &projector, 0.0).unwrap();
        for i in 0..grid.len() {
            assert!(max_diff(plain.state(i), inh.state(i)) <= 1e-10);
        }
        let nothing = p.propagate_inhomogeneous(&pulse, &zero, &source, &projector, 0.0).unwrap();
        assert!(nothing.states().iter().all(|s| s.iter().all(|v| *v == c(0.0, 0.0))));

        let w = -0.5 / grid.t_final();
        let full = p.propagate_inhomogeneous(&pulse, &seed, &source, &projector, w).unwrap();
        let source_only = p.propagate_inhomogeneous(&pulse, &zero, &source, &projector, w).unwrap();
        for i in 0..grid.len() {
            let sum = plain.state(i) + source_only.state(i);
            assert!(max_diff(full.state(i), &sum) <= 1e-10, "{b:?} i={i}");
        }
    }
}

#[test]
fn backends_agree_on_inhomogeneous_propagation() {
    let na = build_sodium_system().unwrap();
    let grid = TimeGrid::new(fs_to_au(60.0), 512).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pulse = random_pulse(&mut rng, grid);
    let source = propagate(&na, &pulse, &na.basis_state(0), &grid, Direction::Forward).unwrap();
    let projector = SubspaceProjector::from_labels(&na, &["3s", "4s"]).unwrap();
    let seed = random_state(&mut rng, 8);
    let w = -1.0 / grid.t_final();
    let a = Propagator::new(&na, config(Backend::Chebyshev, FieldSampling::Right))
        .propagate_inhomogeneous(&pulse, &seed, &source, &projector, w)
        .unwrap();
    let b = Propagator::new(&na, config(Backend::Eigen, FieldSampling::Right))
        .propagate_inhomogeneous(&pulse, &seed, &source, &projector, w)
        .unwrap();
    for i in 0..grid.len() {
        assert!(max_diff(a.state(i), b.state(i)) <= 1e-10);
    }
}

#[test]
fn grid_mismatch_is_rejected() {
    let na = build_sodium_system().unwrap();
    let grid = TimeGrid::new(100.0, 64).unwrap();
    let other = TimeGrid::new(100.0, 65).unwrap();
    let pulse = Pulse::zeros(grid);
    let source = propagate(&na, &Pulse::zeros(other), &na.basis_state(0), &other, Direction::Forward).unwrap();
    let p = SubspaceProjector::identity(8);
    assert!(propagate_inhomogeneous(&na, &pulse, &na.basis_state(0), &source, &p, 1.0, &grid).is_err());
    assert!(propagate(&na, &pulse, &na.basis_state(0), &other, Direction::Forward).is_err());
}

#[test]
fn step_derivative_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..8 {
        let sys = random_system(&mut rng, 2 + case % 5);
        let x = random_state(&mut rng, sys.dim());
        let eps = rng.gen_range(-0.05..0.05);
        let dt = rng.gen_range(0.5..20.0);
        for backend in BACKENDS {
            let p = Propagator::new(&sys, config(backend, FieldSampling::Left));
            let (value, d) = p.step_with_derivative(eps, dt, &x, 0).unwrap();
            assert!(max_diff(&value, &p.step(eps, dt, &x, 0).unwrap()) < 1e-13);
            let h = 1e-6;
            let fd = (p.step(eps + h, dt, &x, 0).unwrap() - p.step(eps - h, dt, &x, 0).unwrap()) / c(2.0 * h, 0.0);
            let scale = d.norm().max(1e-3);
            assert!(
                max_diff(&d, &fd) <= 1e-7 * scale,
                "case {case} {backend:?}: {:e}",
                max_diff(&d, &fd)
            );
        }
    }
}
