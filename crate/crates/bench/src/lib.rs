//! Fixtures shared by the benchmarks in `benches/`.

use krotov_core::units::fs_to_au;
use krotov_core::{
    build_sodium_system, gaussian_guess_pulse, ConstraintMode, FilterBank, OptimizationProblem,
    SpectralFilter, SpectralSettings, SubspaceProjector, TargetSpec, TimeGrid,
};

/// Sodium two-photon absorption on a 600 fs grid of `n_points`, 50 fs guess.
pub fn sodium_tpa(n_points: usize, lambda0: f64) -> OptimizationProblem {
    let na = build_sodium_system().expect("bundled model");
    let grid = TimeGrid::new(fs_to_au(600.0), n_points).expect("grid");
    let omega = 0.5 * na.transition_frequency("3s", "4s").expect("levels");
    let guess = gaussian_guess_pulse(omega, 5e-4, fs_to_au(50.0), &grid).expect("guess");
    let target = TargetSpec::population(SubspaceProjector::from_labels(&na, &["4s"]).expect("4s"));
    let psi0 = na.basis_state(0);
    OptimizationProblem::new(na, grid, vec![psi0], target, guess, lambda0).expect("problem")
}

/// The four sodium filters (both one-photon lines, 3 and 5 omega_L).
pub fn sodium_filters(problem: &OptimizationProblem) -> FilterBank {
    let na = &problem.system;
    let w1 = na.transition_frequency("3s", "3p").expect("levels");
    let w2 = na.transition_frequency("3p", "4s").expect("levels");
    let wl = 0.5 * na.transition_frequency("3s", "4s").expect("levels");
    let filters = [w1, w2, 3.0 * wl, 5.0 * wl]
        .iter()
        .map(|&w| SpectralFilter::filter(w, 0.004, 1e6))
        .collect();
    FilterBank::new(0.0, filters).expect("bank")
}

pub fn with_spectral(problem: OptimizationProblem, order: Option<usize>) -> OptimizationProblem {
    let mut s = SpectralSettings::new(sodium_filters(&problem));
    s.basis_order = order;
    problem.with_constraint(ConstraintMode::Spectral(s)).expect("admissible")
}
