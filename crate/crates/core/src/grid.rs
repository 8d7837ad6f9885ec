//! Uniform time grids and real control pulses sampled on them.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Uniform grid `t_i = i * dt`, `i = 0..n_points`, spanning `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::config(format!(
                "time grid needs at least 2 points, got {n_points}"
            )));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::config(format!(
                "time grid duration must be positive and finite, got {t_final}"
            )));
        }
        Ok(TimeGrid { t_final, n_points })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of propagation steps, `n_points - 1`.
    pub fn steps(&self) -> usize {
        self.n_points - 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.n_points - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = self.dt();
        (0..self.n_points).map(move |i| i as f64 * dt)
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.n_points];
        w[0] = 0.5 * dt;
        w[self.n_points - 1] = 0.5 * dt;
        w
    }

    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n_points);
        let inner: f64 = samples[1..self.n_points - 1].iter().sum();
        self.dt() * (inner + 0.5 * (samples[0] + samples[self.n_points - 1]))
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_points == other.n_points
            && (self.t_final - other.t_final).abs() <= 1e-12 * self.t_final
    }

    /// `S(t) = sin^2(pi t / T)`, vanishing at both ends.
    pub fn sin2_shape(&self) -> Vec<f64> {
        let t_final = self.t_final;
        let mut s: Vec<f64> = self
            .times()
            .map(|t| (PI * t / t_final).sin().powi(2))
            .collect();
        s[0] = 0.0;
        s[self.n_points - 1] = 0.0;
        s
    }
}

/// Real control field `eps(t_i)` in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Pulse {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::config(format!(
                "pulse has {} samples but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!("pulse sample {i} is not finite")));
        }
        Ok(Pulse { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Pulse {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Pulse {
            values: grid.times().map(f).collect(),
            grid,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Elementwise difference `self - other`.
    pub fn difference(&self, other: &Pulse) -> Vec<f64> {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect()
    }
}
