//! Independent reference implementations used only by the tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use krotov_core::{LevelSystem, State};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Complex matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let norm: f64 = a
        .row_iter()
        .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scaled = a / c(2f64.powi(s), 0.0);
    let n = a.nrows();
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / c(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// `exp(-i H dt)` from the dense Hamiltonian.
pub fn dense_step(system: &LevelSystem, eps: f64, dt: f64) -> DMatrix<Complex64> {
    let h = system.hamiltonian(eps).map(|v| c(0.0, -v * dt));
    expm(&h)
}

pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> State {
    let v = DVector::from_fn(dim, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let n = v.norm();
    v / c(n, 0.0)
}

/// Random real symmetric few-level system with zero-diagonal dipoles.
pub fn random_system(rng: &mut ChaCha8Rng, dim: usize) -> LevelSystem {
    let labels = (0..dim).map(|i| format!("l{i}")).collect();
    let mut energies: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..0.2)).collect();
    energies[0] = 0.0;
    let mut d = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i + 1..dim {
            let v = rng.gen_range(-2.0..2.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    LevelSystem::new(labels, energies, d).unwrap()
}

pub fn max_diff(a: &State, b: &State) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}
