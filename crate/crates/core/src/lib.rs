//! Krotov's method for quantum optimal control of few-level systems, with
//! spectral (frequency-filter) and state-dependent (subspace) constraints.
//!
//! All internal quantities are in atomic units. See [`units`] for the
//! conversion constants used at the input/output boundary.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod io;
pub mod krotov;
pub mod model;
pub mod propagation;
pub mod spectral;
pub mod units;

use nalgebra::DVector;
use num_complex::Complex64;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Complex state vector in the level basis.
pub type State = DVector<Complex64>;

pub use error::{AdmissibilityReport, Error, Result};
pub use grid::{Pulse, TimeGrid};
pub use model::{
    build_sodium_system, build_two_manifold_system, gaussian_guess_pulse, parametrized_field,
    target_adjoint_seed, LevelSystem, PulseParametrization, SubspaceProjector, SyntheticManifolds,
    TargetSpec, TwoManifoldTable,
};
pub use propagation::{
    propagate, propagate_inhomogeneous, Backend, Direction, FieldSampling, Propagator,
    PropagatorConfig, StateTrajectory,
};
pub use spectral::{
    check_admissibility, kernel_spectrum, kernel_time, AmplitudeConstraint, ControlPenalty,
    CouplingQuadrature, FilterBank, FilterRole, FredholmOperator, FredholmSolver, FredholmSystem,
    SpectralFilter,
};
pub use krotov::{
    evaluate_functional, optimize, ConstraintMode, FunctionalValues, IterationRecord,
    OptimizationProblem, OptimizationResult, Optimizer, SpectralSettings, StopRule,
};
pub use analysis::{
    band_filter_pulse, landscape_scan, population_trace, pulse_spectrum, LandscapeGrid, Merit,
    Spectrum,
};
