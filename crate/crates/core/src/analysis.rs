//! Pulse spectra, band filtering, population traces and control-landscape scans.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Pulse, TimeGrid};
use crate::model::{parametrized_field, LevelSystem, PulseParametrization, TargetSpec};
use crate::propagation::{Direction, Propagator, PropagatorConfig, StateTrajectory};
use crate::units::au_to_cm1;

/// Discrete Fourier transform `eps(w_k) = dt sum_m eps(t_m) exp(-i w_k t_m)`
/// on the frequencies `w_k = k dw`, `dw = 2 pi / (n dt)`, sorted ascending
/// from `-pi/dt`. No window is applied.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub omega_au: Vec<f64>,
    pub omega_cm1: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub power: Vec<f64>,
    pub d_omega: f64,
    grid: TimeGrid,
}

fn fft(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Position of FFT bin `k` in the ascending (shifted) ordering.
fn shifted_index(k: usize, n: usize) -> usize {
    (k + n / 2) % n
}

fn bin_frequency(k: usize, n: usize, d_omega: f64) -> f64 {
    let signed = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    signed * d_omega
}

pub fn pulse_spectrum(pulse: &Pulse) -> Spectrum {
    let grid = *pulse.grid();
    let n = grid.len();
    let dt = grid.dt();
    let mut buf: Vec<Complex64> = pulse.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(n, false).process(&mut buf);
    let d_omega = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let mut omega = vec![0.0; n];
    let mut amplitude = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in buf.iter().enumerate() {
        let j = shifted_index(k, n);
        omega[j] = bin_frequency(k, n, d_omega);
        amplitude[j] = v * dt;
    }
    Spectrum {
        omega_cm1: omega.iter().map(|&w| au_to_cm1(w)).collect(),
        power: amplitude.iter().map(|a| a.norm_sqr()).collect(),
        omega_au: omega,
        amplitude,
        d_omega,
        grid,
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.omega_au.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_au.is_empty()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `sum |eps(w)|^2 dw` over `lo <= |w| <= hi`, counting both signs.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.omega_au
            .iter()
            .zip(&self.power)
            .filter(|(w, _)| (lo..=hi).contains(&w.abs()))
            .map(|(_, p)| p * self.d_omega)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.d_omega
    }

    /// Frequency (a.u., non-negative) of the largest power in `[lo, hi]`.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<f64> {
        self.omega_au
            .iter()
            .zip(&self.power)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(w, _)| *w)
    }

    /// Inverse transform back to a real pulse; fails if the imaginary part
    /// exceeds `1e-12` of the largest amplitude.
    pub fn to_pulse(&self) -> Result<Pulse> {
        let n = self.len();
        let dt = self.grid.dt();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, b) in buf.iter_mut().enumerate() {
            *b = self.amplitude[shifted_index(k, n)] / dt;
        }
        fft(n, true).process(&mut buf);
        let scale = 1.0 / n as f64;
        let re: Vec<f64> = buf.iter().map(|v| v.re * scale).collect();
        let im = buf.iter().map(|v| (v.im * scale).abs()).fold(0.0, f64::max);
        let top = re.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if im > 1e-12 * top.max(f64::MIN_POSITIVE) && im > 1e-300 {
            return Err(Error::ImaginaryResidue(im));
        }
        Pulse::new(self.grid, re)
    }
}

/// Remove all spectral amplitude with `|w|` outside the `keep` intervals
/// (a.u., `(lo, hi)` with `0 <= lo <= hi`).
pub fn band_filter_pulse(pulse: &Pulse, keep: &[(f64, f64)]) -> Result<Pulse> {
    let grid = pulse.grid();
    let nyquist = std::f64::consts::PI / grid.dt();
    for &(lo, hi) in keep {
        if !(lo >= 0.0 && lo <= hi && lo <= nyquist * (1.0 + 1e-12)) {
            return Err(Error::config(format!(
                "analysis: band ({lo}, {hi}) is not an interval within the Nyquist range [0, {nyquist}]"
            )));
        }
    }
    let mut spec = pulse_spectrum(pulse);
    let tol = 1e-9 * spec.d_omega;
    for (a, w) in spec.amplitude.iter_mut().zip(&spec.omega_au) {
        let w = w.abs();
        if !keep.iter().any(|&(lo, hi)| w >= lo - tol && w <= hi + tol) {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    spec.to_pulse()
}

/// Populations of `levels` at every grid point; `result[i][j]` belongs to `levels[j]`.
pub fn population_trace(trajectory: &StateTrajectory, levels: &[usize]) -> Vec<Vec<f64>> {
    trajectory
        .states()
        .iter()
        .map(|s| levels.iter().map(|&l| s[l].norm_sqr()).collect())
        .collect()
}

/// Largest value of a level's population along a trajectory.
pub fn max_population(trajectory: &StateTrajectory, level: usize) -> f64 {
    trajectory
        .states()
        .iter()
        .map(|s| s[level].norm_sqr())
        .fold(0.0, f64::max)
}

/// Figure of merit evaluated on the final state.
#[derive(Debug, Clone, PartialEq)]
pub enum Merit {
    Population(usize),
    /// `2 Re(psi_a psi_b^*)`, twice the real part of the density-matrix coherence.
    Coherence(usize, usize),
    /// `1 - J_T`.
    Target(TargetSpec),
}

impl Merit {
    pub fn evaluate(&self, psi: &[Complex64]) -> f64 {
        match self {
            Merit::Population(l) => psi[*l].norm_sqr(),
            Merit::Coherence(a, b) => 2.0 * (psi[*a] * psi[*b].conj()).re,
            Merit::Target(t) => t.fidelity(psi),
        }
    }
}

/// Merit on the `(E1, E2)` plane; `values[i][j]` belongs to `(e1[i], e2[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

/// Propagate the ground state under the parametrized field for every
/// amplitude pair. `base` supplies the envelope width and carriers.
pub fn landscape_scan(
    system: &LevelSystem,
    base: &PulseParametrization,
    e1: &[f64],
    e2: &[f64],
    grid: &TimeGrid,
    merit: &Merit,
    config: PropagatorConfig,
) -> Result<LandscapeGrid> {
    if !strictly_increasing(e1) || !strictly_increasing(e2) {
        return Err(Error::config("analysis: landscape axes must be strictly increasing"));
    }
    let propagator = Propagator::new(system, config);
    let psi0 = system.basis_state(0);
    let points: Vec<(usize, usize)> = (0..e1.len()).flat_map(|i| (0..e2.len()).map(move |j| (i, j))).collect();
    let flat = points
        .par_iter()
        .map(|&(i, j)| {
            let pulse = parametrized_field(&base.with_amplitudes(e1[i], e2[j]), grid)?;
            let traj = propagator.propagate(&pulse, &psi0, Direction::Forward)?;
            Ok(merit.evaluate(traj.final_state().as_slice()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = flat.chunks(e2.len()).map(|c| c.to_vec()).collect();
    Ok(LandscapeGrid {
        e1: e1.to_vec(),
        e2: e2.to_vec(),
        values,
    })
}

/// Indices of strict interior local maxima.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_has_single_peak() {
        let n = 512;
        let grid = TimeGrid::new(511.0, n).unwrap();
        // 8 full periods over n dt
        let w0 = 2.0 * std::f64::consts::PI * 8.0 / (n as f64 * grid.dt());
        let p = Pulse::from_fn(grid, |t| (w0 * t).cos());
        let s = pulse_spectrum(&p);
        let peak = s.peak_in(0.0, 10.0).unwrap();
        assert!((peak - w0).abs() < 1e-12);
        let top = s.power.iter().cloned().fold(0.0, f64::max);
        let others = s
            .omega_au
            .iter()
            .zip(&s.power)
            .filter(|(w, _)| (w.abs() - w0).abs() > 1e-9)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        assert!(others < 1e-20 * top);
    }

    #[test]
    fn parseval() {
        let grid = TimeGrid::new(300.0, 777).unwrap();
        let p = Pulse::from_fn(grid, |t| (0.3 * t).sin() * (-(t - 150.0).powi(2) / 2000.0).exp());
        let s = pulse_spectrum(&p);
        let time: f64 = p.values().iter().map(|v| v * v).sum::<f64>() * grid.dt();
        let freq = s.total_power() / (2.0 * std::f64::consts::PI);
        assert!((time - freq).abs() <= 1e-10 * time);
    }

    #[test]
    fn power_is_even_for_real_pulses() {
        let grid = TimeGrid::new(100.0, 256).unwrap();
        let p = Pulse::from_fn(grid, |t| (0.7 * t).cos() + 0.2 * (1.9 * t).sin());
        let s = pulse_spectrum(&p);
        let n = s.len();
        // index n/2 is w = 0; w_k and w_{-k} mirror around it
        for k in 1..n / 2 {
            assert!((s.omega_au[n / 2 + k] + s.omega_au[n / 2 - k]).abs() < 1e-12);
            assert!((s.power[n / 2 + k] - s.power[n / 2 - k]).abs() <= 1e-12 * s.power[n / 2 + k].max(1e-30));
        }
    }

    #[test]
    fn band_filter_extremes_and_idempotence() {
        let grid = TimeGrid::new(200.0, 1000).unwrap();
        let p = Pulse::from_fn(grid, |t| (0.5 * t).cos() * (std::f64::consts::PI * t / 200.0).sin().powi(2));
        let nyq = std::f64::consts::PI / grid.dt();
        let all = band_filter_pulse(&p, &[(0.0, nyq)]).unwrap();
        for (a, b) in all.values().iter().zip(p.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let none = band_filter_pulse(&p, &[]).unwrap();
        assert!(none.values().iter().all(|v| *v == 0.0));
        let once = band_filter_pulse(&p, &[(0.4, 0.6)]).unwrap();
        let twice = band_filter_pulse(&once, &[(0.4, 0.6)]).unwrap();
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!(band_filter_pulse(&p, &[(0.6, 0.4)]).is_err());
    }

    #[test]
    fn maxima() {
        assert_eq!(local_maxima(&[0.0, 1.0, 0.5, 0.7, 0.2, 0.9]), vec![1, 3]);
    }
}
