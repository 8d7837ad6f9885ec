//! Time propagation of the Schrödinger equation `i d/dt psi = H[eps(t)] psi`
//! with a piecewise-constant field, and of the backward adjoint equation with
//! a state-dependent source term.
//!
//! Two interchangeable backends evaluate the short-time propagator: a
//! Chebychev expansion (default) and dense diagonalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Pulse, TimeGrid};
use crate::model::{LevelSystem, SubspaceProjector};
use crate::State;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Which field value is held constant over the step `[t_i, t_{i+1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldSampling {
    /// `eps(t_i)`. This is the value the sequential Krotov sweep updates, so
    /// forward, backward and update passes all see the same Hamiltonian.
    #[default]
    Left,
    /// `(eps(t_i) + eps(t_{i+1})) / 2`.
    Midpoint,
    /// `eps(t_{i+1})`.
    Right,
}

impl FieldSampling {
    pub fn step_value(self, values: &[f64], step: usize) -> f64 {
        match self {
            FieldSampling::Left => values[step],
            FieldSampling::Midpoint => 0.5 * (values[step] + values[step + 1]),
            FieldSampling::Right => values[step + 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Chebyshev,
    /// Dense diagonalization of `H[eps]` at every step.
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub backend: Backend,
    pub sampling: FieldSampling,
    /// Truncation target for the Chebychev series, per step. Errors of
    /// successive steps add up coherently, hence the default well below the
    /// accuracy wanted at the final time.
    pub tolerance: f64,
    /// Use exactly this many Chebychev terms beyond the zeroth; fails with
    /// [`Error::ChebyshevConvergence`] if the neglected tail exceeds `tolerance`.
    pub fixed_order: Option<usize>,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig {
            backend: Backend::Chebyshev,
            sampling: FieldSampling::Left,
            tolerance: 1e-15,
            fixed_order: None,
        }
    }
}

/// One state per grid point, indexed by time (also for backward runs).
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    grid: TimeGrid,
    states: Vec<State>,
}

impl StateTrajectory {
    pub fn new(grid: TimeGrid, states: Vec<State>) -> Result<Self> {
        if states.len() != grid.len() {
            return Err(Error::config(format!(
                "trajectory has {} states for a {}-point grid",
                states.len(),
                grid.len()
            )));
        }
        Ok(StateTrajectory { grid, states })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &State {
        &self.states[i]
    }

    pub fn initial(&self) -> &State {
        &self.states[0]
    }

    pub fn final_state(&self) -> &State {
        &self.states[self.states.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Level populations `|psi_l(t_i)|^2`.
    pub fn populations(&self, i: usize) -> Vec<f64> {
        self.states[i].iter().map(|c| c.norm_sqr()).collect()
    }
}

/// `J_0(x) .. J_{n-1}(x)` for `x >= 0` by Miller's backward recurrence,
/// normalized with `J_0 + 2 sum J_{2k} = 1`.
pub(crate) fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n.max(1)];
    if x == 0.0 {
        out[0] = 1.0;
        out.truncate(n);
        return out;
    }
    let base = n.max(x.ceil() as usize + 1);
    let mut m = base + (160.0 * base as f64).sqrt() as usize + 20;
    m += m % 2;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut sum = 0.0;
    for k in (1..=m).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur is now J_{k-1}
        let j = k - 1;
        if j < out.len() {
            out[j] = cur;
        }
        if j % 2 == 0 && j > 0 {
            sum += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            sum *= 1e-250;
            for v in out.iter_mut().skip(j) {
                *v *= 1e-250;
            }
        }
    }
    sum += cur;
    for v in &mut out {
        *v /= sum;
    }
    out.truncate(n);
    out
}

/// Expansion coefficients of `exp(-i H dt)` and the spectral window used.
struct ChebyshevSeries {
    center: f64,
    half_width: f64,
    coefficients: Vec<Complex64>,
}

impl ChebyshevSeries {
    fn apply(&self, system: &LevelSystem, eps: f64, x: &[Complex64], prefactor: Complex64) -> State {
        let n = x.len();
        let c = &self.coefficients;
        let mut out: Vec<Complex64> = x.iter().map(|v| v * c[0]).collect();
        if c.len() > 1 {
            let mut prev = x.to_vec();
            let mut cur = vec![ZERO; n];
            normalized_apply(system, eps, self.center, self.half_width, &prev, &mut cur);
            for (o, v) in out.iter_mut().zip(&cur) {
                *o += v * c[1];
            }
            let mut next = vec![ZERO; n];
            for ck in &c[2..] {
                normalized_apply(system, eps, self.center, self.half_width, &cur, &mut next);
                for ((nx, p), o) in next.iter_mut().zip(&prev).zip(out.iter_mut()) {
                    *nx = *nx * 2.0 - p;
                    *o += *nx * ck;
                }
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        DVector::from_iterator(n, out.into_iter().map(|v| v * prefactor))
    }

    /// The series applied to `x` and its derivative with respect to `eps`
    /// (the window and coefficients held fixed), by differentiating the
    /// three-term recurrence.
    fn apply_with_derivative(
        &self,
        system: &LevelSystem,
        eps: f64,
        x: &[Complex64],
        prefactor: Complex64,
    ) -> (State, State) {
        let n = x.len();
        let c = &self.coefficients;
        let inv = 1.0 / self.half_width;
        let scaled_dipole = |v: &[Complex64], out: &mut [Complex64]| {
            system.apply_dipole(v, out);
            out.iter_mut().for_each(|o| *o *= inv);
        };
        let mut out: Vec<Complex64> = x.iter().map(|v| v * c[0]).collect();
        let mut dout = vec![ZERO; n];
        if c.len() > 1 {
            let mut prev = x.to_vec();
            let mut dprev = vec![ZERO; n];
            let mut cur = vec![ZERO; n];
            let mut dcur = vec![ZERO; n];
            normalized_apply(system, eps, self.center, self.half_width, &prev, &mut cur);
            scaled_dipole(&prev, &mut dcur);
            for i in 0..n {
                out[i] += cur[i] * c[1];
                dout[i] += dcur[i] * c[1];
            }
            let mut next = vec![ZERO; n];
            let mut dnext = vec![ZERO; n];
            let mut mu_cur = vec![ZERO; n];
            for ck in &c[2..] {
                normalized_apply(system, eps, self.center, self.half_width, &cur, &mut next);
                normalized_apply(system, eps, self.center, self.half_width, &dcur, &mut dnext);
                scaled_dipole(&cur, &mut mu_cur);
                for i in 0..n {
                    next[i] = next[i] * 2.0 - prev[i];
                    dnext[i] = (dnext[i] + mu_cur[i]) * 2.0 - dprev[i];
                    out[i] += next[i] * ck;
                    dout[i] += dnext[i] * ck;
                }
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut next);
                std::mem::swap(&mut dprev, &mut dcur);
                std::mem::swap(&mut dcur, &mut dnext);
            }
        }
        (
            DVector::from_iterator(n, out.into_iter().map(|v| v * prefactor)),
            DVector::from_iterator(n, dout.into_iter().map(|v| v * prefactor)),
        )
    }
}

/// `y = (H - center) x / half_width`.
fn normalized_apply(
    system: &LevelSystem,
    eps: f64,
    center: f64,
    half_width: f64,
    x: &[Complex64],
    y: &mut [Complex64],
) {
    system.apply_hamiltonian(eps, x, y);
    let inv = 1.0 / half_width;
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = (*yi - xi * center) * inv;
    }
}

/// Short-time propagator for a fixed level system.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    system: &'a LevelSystem,
    config: PropagatorConfig,
}

impl<'a> Propagator<'a> {
    pub fn new(system: &'a LevelSystem, config: PropagatorConfig) -> Self {
        Propagator { system, config }
    }

    pub fn system(&self) -> &LevelSystem {
        self.system
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    fn window(&self, eps: f64) -> (f64, f64) {
        let (lo, hi) = self.system.spectral_bounds(eps);
        let center = 0.5 * (lo + hi);
        // a degenerate spectrum still needs a nonzero window
        let half = (0.5 * (hi - lo)).max(1e-10 * (1.0 + center.abs()));
        (center, half)
    }

    fn series(&self, eps: f64, dt: f64, step: usize) -> Result<ChebyshevSeries> {
        let (center, half_width) = self.window(eps);
        let alpha = half_width * dt.abs();
        let tol = self.config.tolerance;
        let available = (1.2 * alpha).ceil() as usize + 40;
        let j = bessel_j_sequence(alpha, available.max(self.config.fixed_order.unwrap_or(0) + 2));
        // tail[k] = 2 sum_{m >= k} |J_m|
        let mut tail = vec![0.0; j.len() + 1];
        for k in (0..j.len()).rev() {
            tail[k] = tail[k + 1] + 2.0 * j[k].abs();
        }
        let order = match self.config.fixed_order {
            Some(order) => {
                if tail[order + 1] > tol {
                    return Err(Error::ChebyshevConvergence {
                        step,
                        order,
                        residual: tail[order + 1],
                    });
                }
                order
            }
            None => (alpha.ceil() as usize..j.len())
                .find(|&k| tail[k + 1] <= tol)
                .unwrap_or(j.len() - 1),
        };
        // e^{-i H dt} = e^{-i c dt} sum (2 - delta_k0) (-i sgn dt)^k J_k(alpha) T_k
        let phase = Complex64::new(0.0, -dt.signum());
        let mut p = Complex64::new(1.0, 0.0);
        let coefficients = (0..=order)
            .map(|k| {
                let w = if k == 0 { 1.0 } else { 2.0 };
                let c = p * (w * j[k]);
                p *= phase;
                c
            })
            .collect();
        Ok(ChebyshevSeries {
            center,
            half_width,
            coefficients,
        })
    }

    fn eigen(&self, eps: f64, step: usize) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
        let eig = SymmetricEigen::try_new(self.system.hamiltonian(eps), f64::EPSILON, 0)
            .ok_or(Error::Diagonalization { step })?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diagonalization { step });
        }
        Ok(eig)
    }

    /// `exp(-i H[eps] dt) x`; a negative `dt` propagates backward.
    pub fn step(&self, eps: f64, dt: f64, x: &State, step: usize) -> Result<State> {
        match self.config.backend {
            Backend::Chebyshev => {
                let series = self.series(eps, dt, step)?;
                let prefactor = Complex64::from_polar(1.0, -series.center * dt);
                Ok(series.apply(self.system, eps, x.as_slice(), prefactor))
            }
            Backend::Eigen => {
                let eig = self.eigen(eps, step)?;
                Ok(apply_spectral_function(&eig, x, |l| Complex64::from_polar(1.0, -l * dt)))
            }
        }
    }

    /// `exp(-i H[eps] dt) x` together with its derivative with respect to
    /// `eps`, the exact sensitivity of one step to the field value used in it.
    pub fn step_with_derivative(&self, eps: f64, dt: f64, x: &State, step: usize) -> Result<(State, State)> {
        match self.config.backend {
            Backend::Chebyshev => {
                let series = self.series(eps, dt, step)?;
                let prefactor = Complex64::from_polar(1.0, -series.center * dt);
                Ok(series.apply_with_derivative(self.system, eps, x.as_slice(), prefactor))
            }
            Backend::Eigen => {
                // Frechet derivative in the eigenbasis: divided differences of
                // exp(-i l dt) times the dipole matrix elements
                let eig = self.eigen(eps, step)?;
                let v: DMatrix<Complex64> = eig.eigenvectors.map(|e| Complex64::new(e, 0.0));
                let mu = self.system.dipoles().map(|m| Complex64::new(m, 0.0));
                let mu_eig = v.tr_mul(&(mu * &v));
                let l = &eig.eigenvalues;
                let y = v.tr_mul(x);
                let f: Vec<Complex64> = l.iter().map(|&lk| Complex64::from_polar(1.0, -lk * dt)).collect();
                let mut dy = DVector::zeros(y.len());
                for j in 0..y.len() {
                    for k in 0..y.len() {
                        let dd = f[k] * Complex64::new(0.0, -1.0) * phi1(l[k] - l[j], dt);
                        dy[j] += dd * mu_eig[(j, k)] * y[k];
                    }
                }
                let fy = DVector::from_iterator(y.len(), y.iter().zip(&f).map(|(a, b)| a * b));
                Ok((&v * fy, v * dy))
            }
        }
    }

    /// `G(H) s = int_0^dt exp(i H tau) s dtau` for `dt > 0`: the contribution
    /// of a constant source `s` to one backward step of the adjoint equation.
    pub fn source_integral(&self, eps: f64, dt: f64, s: &State, step: usize) -> Result<State> {
        let g = |l: f64| phi1(l, dt);
        match self.config.backend {
            Backend::Eigen => {
                let eig = self.eigen(eps, step)?;
                Ok(apply_spectral_function(&eig, s, g))
            }
            Backend::Chebyshev => {
                let (center, half_width) = self.window(eps);
                let hom = self.series(eps, dt, step);
                let base_order = match (&hom, self.config.fixed_order) {
                    (_, Some(o)) => o,
                    (Ok(h), None) => h.coefficients.len() - 1,
                    (Err(_), None) => unreachable!("adaptive order never fails"),
                };
                let nodes = base_order + 24;
                let c = chebyshev_coefficients(|x| g(center + half_width * x), nodes);
                let tol = self.config.tolerance * dt;
                let order = match self.config.fixed_order {
                    Some(order) => {
                        let residual: f64 = c.iter().skip(order + 1).map(|v| v.norm()).sum();
                        if residual > tol {
                            return Err(Error::ChebyshevConvergence {
                                step,
                                order,
                                residual: residual / dt,
                            });
                        }
                        order
                    }
                    None => {
                        let mut tail = 0.0;
                        let mut order = 0;
                        for k in (0..c.len()).rev() {
                            tail += c[k].norm();
                            if tail > tol {
                                order = k;
                                break;
                            }
                        }
                        order
                    }
                };
                let series = ChebyshevSeries {
                    center,
                    half_width,
                    coefficients: c[..=order].to_vec(),
                };
                Ok(series.apply(self.system, eps, s.as_slice(), Complex64::new(1.0, 0.0)))
            }
        }
    }

    fn check_grid(&self, pulse: &Pulse, dim: usize) -> Result<()> {
        if dim != self.system.dim() {
            return Err(Error::config(format!(
                "state dimension {dim} does not match the {}-level system",
                self.system.dim()
            )));
        }
        if pulse.grid().len() < 2 {
            return Err(Error::config("propagation needs at least two grid points"));
        }
        Ok(())
    }

    /// Propagate over the whole grid. For [`Direction::Backward`], `initial`
    /// is the state at `t = T`.
    pub fn propagate(&self, pulse: &Pulse, initial: &State, direction: Direction) -> Result<StateTrajectory> {
        self.check_grid(pulse, initial.len())?;
        let grid = *pulse.grid();
        let dt = grid.dt();
        let n = grid.len();
        let eps = pulse.values();
        let mut states = vec![initial.clone(); n];
        match direction {
            Direction::Forward => {
                for i in 0..n - 1 {
                    let e = self.config.sampling.step_value(eps, i);
                    states[i + 1] = self.step(e, dt, &states[i], i)?;
                }
            }
            Direction::Backward => {
                for i in (0..n - 1).rev() {
                    let e = self.config.sampling.step_value(eps, i);
                    states[i] = self.step(e, -dt, &states[i + 1], i)?;
                }
            }
        }
        StateTrajectory::new(grid, states)
    }

    /// Backward solution of `d/dt chi = -i H chi + w P psi(t)` from `chi(T) = seed`.
    ///
    /// Over each step the Hamiltonian is held at the sampled field value and
    /// the source at the endpoint average `w/2 (P psi(t_i) + P psi(t_{i+1}))`;
    /// the step is then integrated exactly. With `w = 0` this reduces to
    /// [`Propagator::propagate`] backward, bit for bit.
    pub fn propagate_inhomogeneous(
        &self,
        pulse: &Pulse,
        seed: &State,
        source: &StateTrajectory,
        projector: &SubspaceProjector,
        weight: f64,
    ) -> Result<StateTrajectory> {
        if !source.grid().same_as(pulse.grid()) {
            return Err(Error::config(
                "source trajectory and pulse are sampled on different time grids",
            ));
        }
        if projector.dim() != seed.len() || source.dim() != seed.len() {
            return Err(Error::config(format!(
                "inhomogeneous propagation: seed has dimension {}, source {}, projector {}",
                seed.len(),
                source.dim(),
                projector.dim()
            )));
        }
        if weight == 0.0 {
            return self.propagate(pulse, seed, Direction::Backward);
        }
        self.check_grid(pulse, seed.len())?;
        let grid = *pulse.grid();
        let dt = grid.dt();
        let n = grid.len();
        let eps = pulse.values();
        let mut states = vec![seed.clone(); n];
        let half = Complex64::new(0.5 * weight, 0.0);
        for i in (0..n - 1).rev() {
            let e = self.config.sampling.step_value(eps, i);
            let avg = (projector.apply(source.state(i)) + projector.apply(source.state(i + 1))) * half;
            let homogeneous = self.step(e, -dt, &states[i + 1], i)?;
            let driven = self.source_integral(e, dt, &avg, i)?;
            states[i] = homogeneous - driven;
        }
        StateTrajectory::new(grid, states)
    }
}

/// `int_0^dt exp(i l tau) dtau`.
fn phi1(l: f64, dt: f64) -> Complex64 {
    let x = 0.5 * l * dt;
    let sinc = if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    };
    Complex64::from_polar(dt * sinc, x)
}

/// Chebychev coefficients of `f` on `[-1, 1]` from `m` Chebychev-Gauss nodes,
/// with the `k = 0` term already halved.
fn chebyshev_coefficients(f: impl Fn(f64) -> Complex64, m: usize) -> Vec<Complex64> {
    let theta: Vec<f64> = (0..m)
        .map(|j| std::f64::consts::PI * (j as f64 + 0.5) / m as f64)
        .collect();
    let values: Vec<Complex64> = theta.iter().map(|t| f(t.cos())).collect();
    (0..m)
        .map(|k| {
            let s: Complex64 = values
                .iter()
                .zip(&theta)
                .map(|(v, t)| v * (k as f64 * t).cos())
                .sum();
            s * if k == 0 { 1.0 / m as f64 } else { 2.0 / m as f64 }
        })
        .collect()
}

fn apply_spectral_function(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    x: &State,
    f: impl Fn(f64) -> Complex64,
) -> State {
    let v: DMatrix<Complex64> = eig.eigenvectors.map(|e| Complex64::new(e, 0.0));
    let mut y = v.tr_mul(x);
    for (yi, l) in y.iter_mut().zip(eig.eigenvalues.iter()) {
        *yi *= f(*l);
    }
    v * y
}

/// Propagate with the default Chebychev configuration.
pub fn propagate(
    system: &LevelSystem,
    pulse: &Pulse,
    initial: &State,
    grid: &TimeGrid,
    direction: Direction,
) -> Result<StateTrajectory> {
    if !pulse.grid().same_as(grid) {
        return Err(Error::config("pulse is not sampled on the requested grid"));
    }
    Propagator::new(system, PropagatorConfig::default()).propagate(pulse, initial, direction)
}

/// Backward adjoint propagation with source weight `weight` (see
/// [`Propagator::propagate_inhomogeneous`]) and the default configuration.
pub fn propagate_inhomogeneous(
    system: &LevelSystem,
    pulse: &Pulse,
    seed: &State,
    source: &StateTrajectory,
    projector: &SubspaceProjector,
    weight: f64,
    grid: &TimeGrid,
) -> Result<StateTrajectory> {
    if !pulse.grid().same_as(grid) {
        return Err(Error::config("pulse is not sampled on the requested grid"));
    }
    Propagator::new(system, PropagatorConfig::default())
        .propagate_inhomogeneous(pulse, seed, source, projector, weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_sodium_system;

    #[test]
    fn bessel_values() {
        // reference values J_k(x) to 15 digits
        let j = bessel_j_sequence(1.0, 4);
        assert!((j[0] - 0.765197686557966551).abs() < 1e-15);
        assert!((j[1] - 0.440050585744933516).abs() < 1e-15);
        assert!((j[2] - 0.114903484931900481).abs() < 1e-15);
        let j = bessel_j_sequence(10.0, 12);
        assert!((j[0] - -0.245935764451348335).abs() < 1e-14);
        assert!((j[1] - 0.0434727461688614367).abs() < 1e-14);
        assert!((j[10] - 0.207486106633358858).abs() < 1e-14);
        let j = bessel_j_sequence(1e-12, 3);
        assert!((j[0] - 1.0).abs() < 1e-15);
        assert!((j[1] - 5e-13).abs() < 1e-25);
    }

    #[test]
    fn chebyshev_fixed_order_reports_step() {
        let na = build_sodium_system().unwrap();
        let cfg = PropagatorConfig {
            fixed_order: Some(2),
            ..Default::default()
        };
        let p = Propagator::new(&na, cfg);
        let x = na.basis_state(0);
        match p.step(0.0, 50.0, &x, 17) {
            Err(Error::ChebyshevConvergence { step, order, residual }) => {
                assert_eq!((step, order), (17, 2));
                assert!(residual > 1e-12);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn sampling_modes() {
        let v = [1.0, 3.0];
        assert_eq!(FieldSampling::Left.step_value(&v, 0), 1.0);
        assert_eq!(FieldSampling::Midpoint.step_value(&v, 0), 2.0);
        assert_eq!(FieldSampling::Right.step_value(&v, 0), 3.0);
    }

    #[test]
    fn phi1_small_argument() {
        let a = phi1(1e-9, 2.0);
        assert!((a - Complex64::new(2.0, 2e-9)).norm() < 1e-15);
        let b = phi1(0.3, 2.0);
        let exact = (Complex64::from_polar(1.0, 0.6) - 1.0) / Complex64::new(0.0, 0.3);
        assert!((b - exact).norm() < 1e-15);
    }
}
