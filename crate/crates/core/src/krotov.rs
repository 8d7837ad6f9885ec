//! Krotov iterations with first-order updates (`sigma = 0`).
//!
//! The functional minimized is `J = J_T + J_a + J_b`:
//! `J_T` is the average of the per-state targets, `J_a` the control penalty
//! of [`ControlPenalty`] measured against the previous iteration's pulse, and
//! `J_b = lambda_b / (T N) sum_k int <psi_k|P|psi_k> dt`. A negative
//! `lambda_b` rewards population in the subspace of `P`; monotonic
//! convergence is guaranteed for `lambda_b <= 0`.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Pulse, TimeGrid};
use crate::model::{overlap, LevelSystem, SubspaceProjector, TargetSpec};
use crate::propagation::{Direction, FieldSampling, Propagator, PropagatorConfig, StateTrajectory};
use crate::spectral::{
    check_admissibility, AmplitudeConstraint, ControlPenalty, CouplingQuadrature, FilterBank,
    FredholmOperator, FredholmSolver,
};
use crate::State;

/// Allowed increase of `J` between iterations before the run is aborted.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSettings {
    pub bank: FilterBank,
    /// Hat-basis order of the Fredholm solve; `None` picks the order from
    /// the highest filter frequency, see [`SpectralSettings::order_for`].
    pub basis_order: Option<usize>,
    pub quadrature: CouplingQuadrature,
}

impl SpectralSettings {
    pub fn new(bank: FilterBank) -> Self {
        SpectralSettings {
            bank,
            basis_order: None,
            quadrature: CouplingQuadrature::default(),
        }
    }

    /// Explicit order, or enough hats for eight per period of the fastest
    /// active filter (`omega + 4 sigma`), capped at `n_points - 1`.
    pub fn order_for(&self, grid: &TimeGrid) -> usize {
        let max = grid.steps().max(1);
        match self.basis_order {
            Some(n) => n,
            None => {
                let top = self
                    .bank
                    .filters
                    .iter()
                    .filter(|f| f.weight != 0.0)
                    .map(|f| f.omega.abs() + 4.0 * f.sigma)
                    .fold(0.0, f64::max);
                let n = (4.0 * grid.t_final() * top / std::f64::consts::PI).ceil() as usize;
                n.clamp(16.min(max), max)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintMode {
    None,
    Spectral(SpectralSettings),
    State {
        projector: SubspaceProjector,
        lambda_b: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iterations: usize,
    /// Stop once `J_T` (the infidelity) is at or below this value.
    pub j_t_threshold: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iterations: 5000,
            j_t_threshold: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub system: LevelSystem,
    pub grid: TimeGrid,
    pub initial_states: Vec<State>,
    pub target: TargetSpec,
    pub guess: Pulse,
    pub constraint: ConstraintMode,
    /// `lambda0` and the shape function `S(t)`.
    pub amplitude: AmplitudeConstraint,
    pub stop: StopRule,
    pub propagator: PropagatorConfig,
    /// Keep a copy of the pulse every this many iterations (and the last one).
    pub snapshot_every: Option<usize>,
}

impl OptimizationProblem {
    pub fn new(
        system: LevelSystem,
        grid: TimeGrid,
        initial_states: Vec<State>,
        target: TargetSpec,
        guess: Pulse,
        lambda0: f64,
    ) -> Result<Self> {
        let amplitude = AmplitudeConstraint::sin2(lambda0, &grid)?;
        let problem = OptimizationProblem {
            system,
            grid,
            initial_states,
            target,
            guess,
            constraint: ConstraintMode::None,
            amplitude,
            stop: StopRule::default(),
            propagator: PropagatorConfig::default(),
            snapshot_every: None,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_constraint(mut self, constraint: ConstraintMode) -> Result<Self> {
        self.constraint = constraint;
        self.validate()?;
        Ok(self)
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.system.dim();
        if self.initial_states.is_empty() {
            return Err(Error::config("krotov: at least one initial state is required"));
        }
        for (k, s) in self.initial_states.iter().enumerate() {
            if s.len() != d {
                return Err(Error::config(format!(
                    "krotov: initial state {k} has dimension {}, system has {d} levels",
                    s.len()
                )));
            }
            if (s.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::config(format!("krotov: initial state {k} is not normalized")));
            }
        }
        if self.target.dim() != d {
            return Err(Error::config("krotov: target dimension does not match the system"));
        }
        if !self.guess.grid().same_as(&self.grid) {
            return Err(Error::config("krotov: guess pulse is not sampled on the problem grid"));
        }
        if self.amplitude.shape.len() != self.grid.len() {
            return Err(Error::config("krotov: shape function is not sampled on the problem grid"));
        }
        match &self.constraint {
            ConstraintMode::None => {}
            ConstraintMode::Spectral(s) => {
                check_admissibility(&s.bank)?;
                let order = s.order_for(&self.grid);
                if order == 0 || order > self.grid.len() - 1 {
                    return Err(Error::config(format!(
                        "spectral: basis order {order} outside 1..={}",
                        self.grid.len() - 1
                    )));
                }
            }
            ConstraintMode::State { projector, lambda_b } => {
                if projector.dim() != d {
                    return Err(Error::config("krotov: projector dimension does not match the system"));
                }
                if !lambda_b.is_finite() {
                    return Err(Error::config("krotov: lambda_b must be finite"));
                }
            }
        }
        Ok(())
    }

    fn propagator(&self) -> Propagator<'_> {
        Propagator::new(&self.system, self.propagator)
    }

    fn bank(&self) -> Option<&FilterBank> {
        match &self.constraint {
            ConstraintMode::Spectral(s) => Some(&s.bank),
            _ => None,
        }
    }

    pub fn control_penalty(&self) -> Result<ControlPenalty> {
        ControlPenalty::new(self.grid, self.amplitude.clone(), self.bank())
    }

    /// Source weight `lambda_b / (T N)` of the adjoint equation.
    fn state_weight(&self) -> Option<(&SubspaceProjector, f64)> {
        match &self.constraint {
            ConstraintMode::State { projector, lambda_b } => Some((
                projector,
                lambda_b / (self.grid.t_final() * self.initial_states.len() as f64),
            )),
            _ => None,
        }
    }

    /// Forward propagation of every initial state.
    pub fn propagate_all(&self, pulse: &Pulse) -> Result<Vec<StateTrajectory>> {
        let p = self.propagator();
        self.initial_states
            .par_iter()
            .map(|psi| p.propagate(pulse, psi, Direction::Forward))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValues {
    pub j_t: f64,
    pub j_a: f64,
    pub j_b: f64,
}

impl FunctionalValues {
    pub fn total(&self) -> f64 {
        self.j_t + self.j_a + self.j_b
    }
}

fn j_t(problem: &OptimizationProblem, trajectories: &[StateTrajectory]) -> f64 {
    let n = trajectories.len() as f64;
    trajectories
        .iter()
        .map(|t| problem.target.functional(t.final_state().as_slice()))
        .sum::<f64>()
        / n
}

fn j_b(problem: &OptimizationProblem, trajectories: &[StateTrajectory]) -> f64 {
    match problem.state_weight() {
        None => 0.0,
        Some((projector, w)) => {
            trajectories
                .iter()
                .map(|t| {
                    let pops: Vec<f64> = t.states().iter().map(|s| projector.expectation(s.as_slice())).collect();
                    problem.grid.integrate(&pops)
                })
                .sum::<f64>()
                * w
        }
    }
}

/// `(J_T, J_a, J_b)` for `pulse` with `J_a` measured against `reference`.
pub fn evaluate_functional(
    problem: &OptimizationProblem,
    pulse: &Pulse,
    reference: &Pulse,
    trajectories: &[StateTrajectory],
) -> Result<FunctionalValues> {
    let penalty = problem.control_penalty()?;
    Ok(FunctionalValues {
        j_t: j_t(problem, trajectories),
        j_a: penalty.evaluate(&pulse.difference(reference)),
        j_b: j_b(problem, trajectories),
    })
}

/// Adjoint states under `pulse`, seeded from the final states of `forward`.
///
/// In state-constrained mode this is the discrete adjoint of the functional
/// as evaluated on the grid: `chi_i = U_i^dagger chi_{i+1} - w c_i P psi_i`
/// with trapezoid weights `c_i` and `w = lambda_b / (T N)`, a second-order
/// scheme for `d/dt chi = -i H chi + w P psi`. Using the exact adjoint of the
/// evaluated `J_b` keeps the update consistent near stationary points, where
/// the `J_T` and `J_b` gradients nearly cancel.
pub fn backward_adjoints(
    problem: &OptimizationProblem,
    pulse: &Pulse,
    forward: &[StateTrajectory],
) -> Result<Vec<StateTrajectory>> {
    let p = problem.propagator();
    let scale = Complex64::new(1.0 / forward.len() as f64, 0.0);
    let state = problem.state_weight();
    forward
        .par_iter()
        .map(|traj| {
            let psi = traj.final_state();
            if (psi.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::config("krotov: final state lost normalization"));
            }
            let seed = problem.target.adjoint_seed(psi.as_slice()) * scale;
            match state {
                Some((projector, w)) if w != 0.0 => discrete_adjoint(&p, pulse, seed, traj, projector, w),
                _ => p.propagate(pulse, &seed, Direction::Backward),
            }
        })
        .collect()
}

fn discrete_adjoint(
    p: &Propagator<'_>,
    pulse: &Pulse,
    seed: State,
    forward: &StateTrajectory,
    projector: &SubspaceProjector,
    w: f64,
) -> Result<StateTrajectory> {
    let grid = *pulse.grid();
    let n = grid.len();
    let dt = grid.dt();
    let c = grid.trapezoid_weights();
    let sampling = p.config().sampling;
    let source = |i: usize| projector.apply(forward.state(i)) * Complex64::new(w * c[i], 0.0);
    let mut states = vec![seed - source(n - 1); n];
    for i in (0..n - 1).rev() {
        let e = sampling.step_value(pulse.values(), i);
        states[i] = p.step(e, -dt, &states[i + 1], i)? - source(i);
    }
    StateTrajectory::new(grid, states)
}

/// Sequential sweep: walk forward through the grid, updating `eps(t_i)` from
/// the already updated states before stepping with it.
///
/// With left-endpoint sampling the update is
/// `rho_i Re sum_k <chi_k(t_{i+1})| dU_i/d eps |psi_k^new(t_i)> / dt`, the
/// exact sensitivity of the discrete propagation to `eps(t_i)`; it tends to
/// `rho Im sum_k <chi_k|mu|psi_k^new>` as `dt -> 0`. Other samplings use
/// that continuum form at `t_i` directly.
pub fn krotov_sweep(
    problem: &OptimizationProblem,
    pulse: &Pulse,
    adjoints: &[StateTrajectory],
    rho: &[f64],
) -> Result<(Pulse, Vec<StateTrajectory>)> {
    let grid = problem.grid;
    let n = grid.len();
    let dt = grid.dt();
    let p = problem.propagator();
    let sampling = problem.propagator.sampling;
    let exact = sampling == FieldSampling::Left;
    let mut eps = pulse.values().to_vec();
    let mut states: Vec<Vec<State>> = problem
        .initial_states
        .iter()
        .map(|s| {
            let mut v = Vec::with_capacity(n);
            v.push(s.clone());
            v
        })
        .collect();
    for i in 0..n {
        let last = i + 1 == n;
        if exact && !last && rho[i] != 0.0 {
            let mut g = 0.0;
            let mut trial = Vec::with_capacity(states.len());
            for (s, chi) in states.iter().zip(adjoints) {
                let (next, d) = p.step_with_derivative(eps[i], dt, &s[i], i)?;
                g += overlap(chi.state(i + 1).as_slice(), d.as_slice()).re;
                trial.push(next);
            }
            let change = rho[i] * g / dt;
            if change == 0.0 {
                for (s, next) in states.iter_mut().zip(trial) {
                    s.push(next);
                }
                continue;
            }
            eps[i] += change;
        } else if !exact && rho[i] != 0.0 {
            let g: f64 = states
                .iter()
                .zip(adjoints)
                .map(|(s, chi)| problem.system.dipole_matrix_element(chi.state(i).as_slice(), s[i].as_slice()).im)
                .sum();
            eps[i] += rho[i] * g;
        }
        if !last {
            let e = sampling.step_value(&eps, i);
            for s in states.iter_mut() {
                let next = p.step(e, dt, &s[i], i)?;
                s.push(next);
            }
        }
    }
    let trajectories = states
        .into_iter()
        .map(|s| StateTrajectory::new(grid, s))
        .collect::<Result<Vec<_>>>()?;
    Ok((Pulse::new(grid, eps)?, trajectories))
}

/// Pulse and forward trajectories after one iteration.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub pulse: Pulse,
    pub trajectories: Vec<StateTrajectory>,
}

/// One iteration without constraints beyond `lambda0 / S(t)`.
pub fn krotov_step_unconstrained(
    problem: &OptimizationProblem,
    pulse: &Pulse,
    forward: &[StateTrajectory],
) -> Result<StepOutcome> {
    let adjoints = backward_adjoints(problem, pulse, forward)?;
    let rho = problem.amplitude.update_factor(0.0);
    let (pulse, trajectories) = krotov_sweep(problem, pulse, &adjoints, &rho)?;
    Ok(StepOutcome { pulse, trajectories })
}

/// One iteration with the state-dependent source in the adjoint equation.
/// The problem's constraint must be [`ConstraintMode::State`].
pub fn krotov_step_state(
    problem: &OptimizationProblem,
    pulse: &Pulse,
    forward: &[StateTrajectory],
) -> Result<StepOutcome> {
    if problem.state_weight().is_none() {
        return Err(Error::config("krotov: state step requires a state constraint"));
    }
    krotov_step_unconstrained(problem, pulse, forward)
}

/// Two-step spectral iteration: the unconstrained sweep gives `I(t)`, the
/// Fredholm solve gives the constrained change, and the states are
/// re-propagated under the resulting pulse.
pub fn krotov_step_spectral(
    problem: &OptimizationProblem,
    pulse: &Pulse,
    forward: &[StateTrajectory],
    solver: &FredholmSolver,
) -> Result<StepOutcome> {
    let bank = problem
        .bank()
        .ok_or_else(|| Error::config("krotov: spectral step requires a spectral constraint"))?;
    let adjoints = backward_adjoints(problem, pulse, forward)?;
    let rho = problem.amplitude.update_factor(bank.lambda_delta);
    let (sweep_pulse, sweep_trajs) = krotov_sweep(problem, pulse, &adjoints, &rho)?;
    if bank.is_inactive() {
        return Ok(StepOutcome {
            pulse: sweep_pulse,
            trajectories: sweep_trajs,
        });
    }
    let inhomogeneity = sweep_pulse.difference(pulse);
    let delta = solver.solve(&inhomogeneity)?;
    let values = pulse.values().iter().zip(&delta).map(|(e, d)| e + d).collect();
    let new_pulse = Pulse::new(problem.grid, values)?;
    let trajectories = problem.propagate_all(&new_pulse)?;
    Ok(StepOutcome {
        pulse: new_pulse,
        trajectories,
    })
}

/// Build the cached Fredholm solver for a spectral problem.
pub fn fredholm_solver(problem: &OptimizationProblem) -> Result<Option<FredholmSolver>> {
    match &problem.constraint {
        ConstraintMode::Spectral(s) if !s.bank.is_inactive() => {
            let op = FredholmOperator::new(
                &s.bank,
                &problem.amplitude,
                &problem.grid,
                s.order_for(&problem.grid),
                s.quadrature,
            )?;
            Ok(Some(FredholmSolver::new(op)?))
        }
        _ => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j_t: f64,
    pub j_a: f64,
    pub j_b: f64,
    pub j: f64,
    pub max_abs_field: f64,
    /// Index into [`OptimizationResult::snapshots`], if this iteration was kept.
    pub snapshot: Option<usize>,
    /// Seconds since the optimizer was created.
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub pulse: Pulse,
    pub records: Vec<IterationRecord>,
    pub trajectories: Vec<StateTrajectory>,
    pub snapshots: Vec<Pulse>,
    /// Stopped because `J_T` reached the threshold.
    pub converged: bool,
}

/// Stateful iteration driver; [`optimize`] runs it to completion.
pub struct Optimizer {
    problem: OptimizationProblem,
    penalty: ControlPenalty,
    solver: Option<FredholmSolver>,
    pulse: Pulse,
    trajectories: Vec<StateTrajectory>,
    records: Vec<IterationRecord>,
    snapshots: Vec<Pulse>,
    start: Instant,
}

impl Optimizer {
    pub fn new(problem: OptimizationProblem) -> Result<Self> {
        problem.validate()?;
        let start = Instant::now();
        let penalty = problem.control_penalty()?;
        let solver = fredholm_solver(&problem)?;
        let pulse = problem.guess.clone();
        let trajectories = problem.propagate_all(&pulse)?;
        let mut opt = Optimizer {
            problem,
            penalty,
            solver,
            pulse,
            trajectories,
            records: Vec::new(),
            snapshots: Vec::new(),
            start,
        };
        let values = FunctionalValues {
            j_t: j_t(&opt.problem, &opt.trajectories),
            j_a: 0.0,
            j_b: j_b(&opt.problem, &opt.trajectories),
        };
        opt.push_record(0, values);
        Ok(opt)
    }

    fn push_record(&mut self, iteration: usize, v: FunctionalValues) {
        let keep = self
            .problem
            .snapshot_every
            .is_some_and(|k| k > 0 && iteration.is_multiple_of(k));
        let snapshot = if keep {
            self.snapshots.push(self.pulse.clone());
            Some(self.snapshots.len() - 1)
        } else {
            None
        };
        self.records.push(IterationRecord {
            iteration,
            j_t: v.j_t,
            j_a: v.j_a,
            j_b: v.j_b,
            j: v.total(),
            max_abs_field: self.pulse.max_abs(),
            snapshot,
            wall_time: self.start.elapsed().as_secs_f64(),
        });
    }

    pub fn problem(&self) -> &OptimizationProblem {
        &self.problem
    }

    pub fn pulse(&self) -> &Pulse {
        &self.pulse
    }

    pub fn trajectories(&self) -> &[StateTrajectory] {
        &self.trajectories
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn last(&self) -> &IterationRecord {
        &self.records[self.records.len() - 1]
    }

    pub fn is_converged(&self) -> bool {
        self.last().j_t <= self.problem.stop.j_t_threshold
    }

    pub fn is_finished(&self) -> bool {
        self.is_converged() || self.last().iteration >= self.problem.stop.max_iterations
    }

    /// Perform one iteration and check that `J` did not increase.
    pub fn step(&mut self) -> Result<&IterationRecord> {
        let outcome = match &self.problem.constraint {
            ConstraintMode::Spectral(_) => match &self.solver {
                Some(solver) => krotov_step_spectral(&self.problem, &self.pulse, &self.trajectories, solver)?,
                None => {
                    let adjoints = backward_adjoints(&self.problem, &self.pulse, &self.trajectories)?;
                    let rho = self.penalty.update_factor();
                    let (pulse, trajectories) = krotov_sweep(&self.problem, &self.pulse, &adjoints, &rho)?;
                    StepOutcome { pulse, trajectories }
                }
            },
            ConstraintMode::None | ConstraintMode::State { .. } => {
                krotov_step_unconstrained(&self.problem, &self.pulse, &self.trajectories)?
            }
        };
        let values = FunctionalValues {
            j_t: j_t(&self.problem, &outcome.trajectories),
            j_a: self.penalty.evaluate(&outcome.pulse.difference(&self.pulse)),
            j_b: j_b(&self.problem, &outcome.trajectories),
        };
        let previous = self.last().j;
        let iteration = self.last().iteration + 1;
        if values.total() > previous + MONOTONICITY_TOLERANCE {
            return Err(Error::MonotonicityViolation {
                iteration,
                previous,
                current: values.total(),
            });
        }
        self.pulse = outcome.pulse;
        self.trajectories = outcome.trajectories;
        self.push_record(iteration, values);
        Ok(self.last())
    }

    pub fn finish(mut self) -> OptimizationResult {
        let converged = self.is_converged();
        if self.problem.snapshot_every.is_some() && self.last().snapshot.is_none() {
            self.snapshots.push(self.pulse.clone());
            let idx = self.snapshots.len() - 1;
            let last = self.records.len() - 1;
            self.records[last].snapshot = Some(idx);
        }
        OptimizationResult {
            pulse: self.pulse,
            records: self.records,
            trajectories: self.trajectories,
            snapshots: self.snapshots,
            converged,
        }
    }

    /// Iterate until the stop rule holds, calling `observe` after every iteration.
    pub fn run_with(mut self, mut observe: impl FnMut(&IterationRecord)) -> Result<OptimizationResult> {
        while !self.is_finished() {
            observe(self.step()?);
        }
        Ok(self.finish())
    }
}

/// Run Krotov iterations until the stop rule holds.
pub fn optimize(problem: OptimizationProblem) -> Result<OptimizationResult> {
    Optimizer::new(problem)?.run_with(|_| {})
}
