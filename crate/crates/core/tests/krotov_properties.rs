mod common;

use common::{c, random_state, random_system};
use krotov_core::krotov::{backward_adjoints, krotov_step_unconstrained};
use krotov_core::model::overlap;
use krotov_core::{
    evaluate_functional, optimize, ConstraintMode, FilterBank, LevelSystem, OptimizationProblem, Propagator,
    Pulse, SpectralFilter, SpectralSettings, State, StopRule, SubspaceProjector, TargetSpec, TimeGrid,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn guess(grid: TimeGrid, amp: f64, omega: f64) -> Pulse {
    let t = grid.t_final();
    Pulse::from_fn(grid, |s| amp * (std::f64::consts::PI * s / t).sin().powi(2) * (omega * s).cos())
}

fn problem(seed: u64, lambda0: f64) -> OptimizationProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = random_system(&mut rng, 3);
    let grid = TimeGrid::new(200.0, 801).unwrap();
    let omega = sys.energies()[1].max(0.02);
    let target = TargetSpec::population(SubspaceProjector::new(3, [1]).unwrap());
    let psi0 = sys.basis_state(0);
    OptimizationProblem::new(sys, grid, vec![psi0], target, guess(grid, 0.01, omega), lambda0).unwrap()
}

fn spectral(bank: FilterBank) -> ConstraintMode {
    ConstraintMode::Spectral(SpectralSettings::new(bank))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn every_mode_is_monotone(seed in 0u64..1000, lambda0 in 10.0f64..40.0, mode in 0usize..3,
                              lambda_b in -1.0f64..0.0, w in 0.02f64..0.3) {
        let mut p = problem(seed, lambda0);
        p = match mode {
            0 => p,
            1 => p.with_constraint(ConstraintMode::State {
                projector: SubspaceProjector::new(3, [0, 1]).unwrap(),
                lambda_b,
            }).unwrap(),
            _ => p.with_constraint(spectral(
                FilterBank::new(0.0, vec![SpectralFilter::filter(w, 0.01, 1e3)]).unwrap(),
            )).unwrap(),
        };
        p.stop = StopRule { max_iterations: 6, j_t_threshold: 0.0 };
        // the optimizer itself rejects any increase beyond the tolerance
        let r = optimize(p).unwrap();
        for pair in r.records.windows(2) {
            prop_assert!(pair[1].j <= pair[0].j + 1e-10);
        }
    }

    #[test]
    fn control_penalty_vanishes_without_change(seed in 0u64..1000, w in 0.02f64..0.3, weight in 1.0f64..1e6) {
        let p = problem(seed, 5.0)
            .with_constraint(spectral(
                FilterBank::new(0.5, vec![SpectralFilter::filter(w, 0.01, weight)]).unwrap(),
            ))
            .unwrap();
        let fw = p.propagate_all(&p.guess).unwrap();
        let v = evaluate_functional(&p, &p.guess, &p.guess, &fw).unwrap();
        prop_assert_eq!(v.j_a, 0.0);
        let values = p.grid.times().zip(p.guess.values()).map(|(t, e)| e + 1e-3 * (w * t).sin()).collect();
        let shifted = Pulse::new(p.grid, values).unwrap();
        let v = evaluate_functional(&p, &shifted, &p.guess, &fw).unwrap();
        prop_assert!(v.j_a > 0.0);
    }

    #[test]
    fn state_term_equals_weight_when_fully_allowed(seed in 0u64..1000, lambda_b in -3.0f64..3.0, n_init in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = problem(seed, 5.0);
        p.initial_states = (0..n_init).map(|_| random_state(&mut rng, 3)).collect();
        let p = p
            .with_constraint(ConstraintMode::State { projector: SubspaceProjector::identity(3), lambda_b })
            .unwrap();
        let fw = p.propagate_all(&p.guess).unwrap();
        let v = evaluate_functional(&p, &p.guess, &p.guess, &fw).unwrap();
        prop_assert!((v.j_b - lambda_b).abs() <= 1e-12 * lambda_b.abs().max(1.0), "{} vs {}", v.j_b, lambda_b);
    }

    #[test]
    fn adjoint_seed_is_the_gradient_of_the_final_time_functional(seed in 0u64..1000, overlap_target in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 5;
        let target = if overlap_target {
            TargetSpec::overlap(random_state(&mut rng, dim)).unwrap()
        } else {
            TargetSpec::population(SubspaceProjector::new(dim, [1, 3]).unwrap())
        };
        let psi = random_state(&mut rng, dim);
        let delta: State = DVector::from_fn(dim, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let chi = target.adjoint_seed(psi.as_slice());
        let analytic = -2.0 * overlap(chi.as_slice(), delta.as_slice()).re;
        let h = 1e-6;
        let j = |s: f64| 1.0 - target.fidelity((&psi + &delta * c(s, 0.0)).as_slice());
        let fd = (j(h) - j(-h)) / (2.0 * h);
        prop_assert!((fd - analytic).abs() <= 1e-6 * analytic.abs().max(1e-3), "fd {fd} analytic {analytic}");
    }
}

fn final_time_functional(p: &OptimizationProblem, pulse: &Pulse) -> f64 {
    let fw = p.propagate_all(pulse).unwrap();
    1.0 - p.target.fidelity(fw[0].final_state().as_slice())
}

#[test]
fn backward_adjoint_gives_the_field_gradient() {
    let p = problem(7, 5.0);
    let fw = p.propagate_all(&p.guess).unwrap();
    let chi = backward_adjoints(&p, &p.guess, &fw).unwrap();
    let prop = Propagator::new(&p.system, p.propagator);
    let dt = p.grid.dt();
    let h = 1e-6;
    for i in [0, 150, 400, 799] {
        let e = p.guess.values()[i];
        let up = prop.step(e + h, dt, fw[0].state(i), i).unwrap();
        let down = prop.step(e - h, dt, fw[0].state(i), i).unwrap();
        let d_step = (up - down) / c(2.0 * h, 0.0);
        let adjoint = -2.0 * overlap(chi[0].state(i + 1).as_slice(), d_step.as_slice()).re;
        let bump = |s: f64| {
            let mut v = p.guess.values().to_vec();
            v[i] += s;
            Pulse::new(p.grid, v).unwrap()
        };
        let fd = (final_time_functional(&p, &bump(h)) - final_time_functional(&p, &bump(-h))) / (2.0 * h);
        assert!(
            (fd - adjoint).abs() <= 1e-6 * fd.abs().max(1e-8),
            "step {i}: finite difference {fd:e}, adjoint {adjoint:e}"
        );
    }
}

#[test]
fn first_update_is_a_descent_direction() {
    let p = problem(3, 50.0);
    let fw = p.propagate_all(&p.guess).unwrap();
    let j0 = final_time_functional(&p, &p.guess);
    let out = krotov_step_unconstrained(&p, &p.guess, &fw).unwrap();
    assert!(final_time_functional(&p, &out.pulse) < j0);
}

#[test]
fn inactive_spectral_bank_reproduces_the_unconstrained_run() {
    let mut a = problem(11, 5.0);
    a.stop = StopRule { max_iterations: 4, j_t_threshold: 0.0 };
    let b = a.clone().with_constraint(spectral(FilterBank::new(0.0, Vec::new()).unwrap())).unwrap();
    let ra = optimize(a).unwrap();
    let rb = optimize(b).unwrap();
    assert_eq!(ra.pulse, rb.pulse);
    for (x, y) in ra.records.iter().zip(&rb.records) {
        assert_eq!(x.j, y.j);
    }
}

#[test]
fn zero_state_weight_reproduces_the_unconstrained_run() {
    let mut a = problem(12, 5.0);
    a.stop = StopRule { max_iterations: 4, j_t_threshold: 0.0 };
    let b = a
        .clone()
        .with_constraint(ConstraintMode::State { projector: SubspaceProjector::new(3, [0]).unwrap(), lambda_b: 0.0 })
        .unwrap();
    let ra = optimize(a).unwrap();
    let rb = optimize(b).unwrap();
    let err = ra
        .pulse
        .values()
        .iter()
        .zip(rb.pulse.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-14, "{err:e}");
}

#[test]
fn state_reward_keeps_population_in_the_allowed_subspace() {
    // three levels where the direct route to the target passes through level 2
    let sys = LevelSystem::new(
        vec!["g".into(), "e".into(), "m".into()],
        vec![0.0, 0.2, 0.1],
        nalgebra::DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 1.0, 0.2, 0.0, 1.0, 1.0, 1.0, 0.0]),
    )
    .unwrap();
    let grid = TimeGrid::new(400.0, 1601).unwrap();
    let target = TargetSpec::population(SubspaceProjector::new(3, [1]).unwrap());
    let base = OptimizationProblem::new(sys.clone(), grid, vec![sys.basis_state(0)], target, guess(grid, 0.01, 0.1), 2.0)
        .unwrap()
        .with_stop(StopRule { max_iterations: 40, j_t_threshold: 0.0 });
    let leak = |p: OptimizationProblem| {
        let r = optimize(p).unwrap();
        krotov_core::analysis::max_population(&r.trajectories[0], 2)
    };
    let free = leak(base.clone());
    let kept = leak(
        base.with_constraint(ConstraintMode::State { projector: SubspaceProjector::new(3, [0, 1]).unwrap(), lambda_b: -2.0 })
            .unwrap(),
    );
    assert!(kept < free, "with constraint {kept}, without {free}");
}
