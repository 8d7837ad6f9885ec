//! TOML run configuration. Every physical quantity carries its unit in the
//! key name (`_au`, `_cm1`, `_fs`); unknown keys are rejected.

use std::path::{Path, PathBuf};

use krotov_core::model::SubspaceProjector;
use krotov_core::units::{cm1_to_au, fs_to_au, fwhm_to_sigma};
use krotov_core::{
    build_sodium_system, build_two_manifold_system, gaussian_guess_pulse, parametrized_field,
    Backend, ConstraintMode, CouplingQuadrature, FieldSampling, FilterBank,
    LevelSystem, Merit, OptimizationProblem, Pulse, PulseParametrization, PropagatorConfig,
    SpectralFilter, SpectralSettings, State, StopRule, SyntheticManifolds, TargetSpec, TimeGrid,
};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub grid: GridConfig,
    pub guess: Option<GuessConfig>,
    pub target: Option<TargetConfig>,
    pub constraint: Option<ConstraintConfig>,
    pub optimizer: Option<OptimizerConfig>,
    pub propagator: Option<PropagatorSection>,
    pub propagate: Option<PropagateConfig>,
    pub landscape: Option<LandscapeConfig>,
    pub output: Option<OutputConfig>,
    /// Reserved; no stochastic components use it at present.
    pub seed: Option<u64>,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// `sodium` or `rb2-like`; exclusive with `file`.
    pub preset: Option<String>,
    /// Level table in the format of [`LevelSystem::from_table_str`].
    pub file: Option<PathBuf>,
    /// Manifold sizes for `rb2-like` (default 32 each).
    pub ground_levels: Option<usize>,
    pub excited_levels: Option<usize>,
    /// Overrides of the `rb2-like` parameters.
    pub displacement: Option<f64>,
    pub electronic_dipole_au: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_final_fs: Option<f64>,
    pub t_final_au: Option<f64>,
    pub n_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessShape {
    Gaussian,
    Parametrized,
    Zero,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuessConfig {
    pub shape: GuessShape,
    pub center_cm1: Option<f64>,
    pub center_au: Option<f64>,
    /// Carrier at `center_factor * omega(a, b)` for level labels `[a, b]`.
    pub center_transition: Option<[String; 2]>,
    pub center_factor: Option<f64>,
    pub amplitude_au: Option<f64>,
    pub tau_fs: Option<f64>,
    pub tau_au: Option<f64>,
    pub fwhm_fs: Option<f64>,
    /// One- and two-photon amplitudes of the sodium parametrization.
    pub e1_au: Option<f64>,
    pub e2_au: Option<f64>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Population in the span of `levels`.
    Population,
    /// Overlap with the equal-weight superposition of `levels`.
    Superposition,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKind,
    pub levels: Vec<String>,
    /// Initial basis states, one optimized trajectory each (default: first level).
    pub initial: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    None,
    Spectral,
    State,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureName {
    GridTrapezoid,
    HatMassMatrix,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub mode: ConstraintKind,
    /// Weight of the delta part of the kernel (`lambda_a^0`).
    pub lambda_delta: Option<f64>,
    pub basis_order: Option<usize>,
    pub quadrature: Option<QuadratureName>,
    #[serde(default)]
    pub filters: Vec<FilterConfig>,
    pub allowed: Option<Vec<String>>,
    /// Dimensionless weight `lambda_b T` of the state constraint.
    pub lambda_b_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterRoleName {
    Filter,
    Pass,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub role: Option<FilterRoleName>,
    pub center_cm1: Option<f64>,
    pub center_au: Option<f64>,
    pub center_transition: Option<[String; 2]>,
    pub center_factor: Option<f64>,
    pub sigma_cm1: Option<f64>,
    pub sigma_au: Option<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub lambda0: f64,
    pub max_iterations: Option<usize>,
    /// Stop once `J_T = 1 - F` is at or below this value.
    pub j_t_threshold: Option<f64>,
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    pub backend: Option<String>,
    pub sampling: Option<String>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    /// Pulse written by a previous run; the `[guess]` block is used otherwise.
    pub pulse_file: Option<PathBuf>,
    /// Spectral intervals to keep before propagation; everything else is removed.
    pub band_keep_cm1: Option<Vec<[f64; 2]>>,
    pub band_keep_au: Option<Vec<[f64; 2]>>,
    pub initial: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisConfig {
    pub fn samples(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.start + k as f64 * h).collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    pub e1_au: AxisConfig,
    pub e2_au: AxisConfig,
    pub tau_fs: Option<f64>,
    pub fwhm_fs: Option<f64>,
    /// `population:<level>` or `coherence:<a>,<b>`.
    pub merit: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Exactly one of the alternatives must be present.
fn one_of<T>(what: &str, options: Vec<(&str, Option<T>)>) -> Result<T> {
    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
    let mut present: Vec<(&str, T)> = options.into_iter().filter_map(|(n, v)| v.map(|v| (n, v))).collect();
    match present.len() {
        1 => Ok(present.pop().unwrap().1),
        0 => Err(bad(format!("{what}: one of {} is required", names.join(", ")))),
        _ => Err(bad(format!(
            "{what}: give only one of {}",
            present.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn frequency(
    system: &LevelSystem,
    what: &str,
    cm1: Option<f64>,
    au: Option<f64>,
    transition: Option<&[String; 2]>,
    factor: Option<f64>,
) -> Result<f64> {
    let from_transition = match transition {
        Some([a, b]) => Some(system.transition_frequency(a, b)? * factor.unwrap_or(1.0)),
        None => {
            if factor.is_some() {
                return Err(bad(format!("{what}: center_factor requires center_transition")));
            }
            None
        }
    };
    one_of(
        what,
        vec![
            ("center_cm1", cm1.map(cm1_to_au)),
            ("center_au", au),
            ("center_transition", from_transition),
        ],
    )
}

fn duration(what: &str, tau_fs: Option<f64>, tau_au: Option<f64>, fwhm_fs: Option<f64>) -> Result<f64> {
    let tau = one_of(
        what,
        vec![
            ("tau_fs", tau_fs.map(fs_to_au)),
            ("tau_au", tau_au),
            ("fwhm_fs", fwhm_fs.map(|f| fwhm_to_sigma(fs_to_au(f)))),
        ],
    )?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(bad(format!("{what}: duration must be positive")));
    }
    Ok(tau)
}

fn indices(system: &LevelSystem, labels: &[String]) -> Result<Vec<usize>> {
    labels.iter().map(|l| Ok(system.index_of(l)?)).collect()
}

impl RunConfig {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, &base).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Validation that needs no numerics; run before any computation.
    fn check(&self) -> Result<()> {
        let system = self.system()?;
        self.grid()?;
        if let Some(g) = &self.guess {
            if g.shape == GuessShape::File {
                if g.file.is_none() {
                    return Err(bad("guess: shape = \"file\" needs file"));
                }
            } else {
                self.guess_pulse_with(&system, g)?;
            }
        }
        if self.target.is_some() {
            self.target(&system)?;
            self.initial_states(&system, None)?;
        }
        if let Some(o) = &self.optimizer {
            if !(o.lambda0 > 0.0 && o.lambda0.is_finite()) {
                return Err(bad(format!("optimizer.lambda0 must be positive, got {}", o.lambda0)));
            }
        }
        self.propagator_config()?;
        if self.constraint.is_some() {
            self.constraint_mode(&system)?;
        }
        if let Some(l) = &self.landscape {
            if l.e1_au.count == 0 || l.e2_au.count == 0 {
                return Err(bad("landscape: axis count must be at least 1"));
            }
            duration("landscape", l.tau_fs, None, l.fwhm_fs)?;
            self.merit(&system)?;
        }
        if let Some(p) = &self.propagate {
            self.keep_intervals(p)?;
            if let Some(init) = &p.initial {
                indices(&system, init)?;
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn system(&self) -> Result<LevelSystem> {
        let s = &self.system;
        match (&s.preset, &s.file) {
            (Some(_), Some(_)) => Err(bad("system: give either preset or file")),
            (None, None) => Err(bad("system: one of preset, file is required")),
            (None, Some(f)) => Ok(LevelSystem::load(self.resolve(f))?),
            (Some(p), None) => match p.as_str() {
                "sodium" => Ok(build_sodium_system()?),
                "rb2-like" => {
                    let mut m = SyntheticManifolds::rb2_like();
                    if let Some(d) = s.displacement {
                        m.displacement = d;
                    }
                    if let Some(mu) = s.electronic_dipole_au {
                        m.electronic_dipole = mu;
                    }
                    let (g, e) = (s.ground_levels.unwrap_or(32), s.excited_levels.unwrap_or(32));
                    Ok(build_two_manifold_system(g, e, &m.table(g, e))?)
                }
                other => Err(bad(format!("system: unknown preset {other:?} (sodium, rb2-like)"))),
            },
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let t = one_of(
            "grid",
            vec![("t_final_fs", self.grid.t_final_fs.map(fs_to_au)), ("t_final_au", self.grid.t_final_au)],
        )?;
        Ok(TimeGrid::new(t, self.grid.n_points)?)
    }

    pub fn guess_pulse(&self, system: &LevelSystem) -> Result<Pulse> {
        let g = self.guess.as_ref().ok_or_else(|| bad("a [guess] block is required"))?;
        self.guess_pulse_with(system, g)
    }

    fn guess_pulse_with(&self, system: &LevelSystem, g: &GuessConfig) -> Result<Pulse> {
        let grid = self.grid()?;
        match g.shape {
            GuessShape::Zero => Ok(Pulse::zeros(grid)),
            GuessShape::File => {
                let f = g.file.as_ref().ok_or_else(|| bad("guess: shape = \"file\" needs file"))?;
                let path = self.resolve(f);
                let p = krotov_core::io::read_pulse(&path)?;
                if !p.grid().same_as(&grid) {
                    return Err(bad(format!("guess: {} is not sampled on the configured grid", path.display())));
                }
                Ok(p)
            }
            GuessShape::Gaussian => {
                let omega = frequency(
                    system,
                    "guess",
                    g.center_cm1,
                    g.center_au,
                    g.center_transition.as_ref(),
                    g.center_factor,
                )?;
                let amp = g.amplitude_au.ok_or_else(|| bad("guess: amplitude_au is required"))?;
                let tau = duration("guess", g.tau_fs, g.tau_au, g.fwhm_fs)?;
                Ok(gaussian_guess_pulse(omega, amp, tau, &grid)?)
            }
            GuessShape::Parametrized => {
                let tau = duration("guess", g.tau_fs, g.tau_au, g.fwhm_fs)?;
                let p = PulseParametrization::sodium(system, g.e1_au.unwrap_or(0.0), g.e2_au.unwrap_or(0.0), tau)?;
                Ok(parametrized_field(&p, &grid)?)
            }
        }
    }

    pub fn target(&self, system: &LevelSystem) -> Result<TargetSpec> {
        let t = self.target.as_ref().ok_or_else(|| bad("a [target] block is required"))?;
        if t.levels.is_empty() {
            return Err(bad("target: levels must not be empty"));
        }
        let idx = indices(system, &t.levels)?;
        match t.kind {
            TargetKind::Population => Ok(TargetSpec::population(SubspaceProjector::new(system.dim(), idx)?)),
            TargetKind::Superposition => {
                let mut phi = State::zeros(system.dim());
                for i in idx {
                    phi[i] += Complex64::new(1.0, 0.0);
                }
                Ok(TargetSpec::overlap(phi)?)
            }
        }
    }

    /// Initial basis states: `labels` if given, else `target.initial`, else the first level.
    pub fn initial_states(&self, system: &LevelSystem, labels: Option<&[String]>) -> Result<Vec<State>> {
        let labels = labels.or_else(|| self.target.as_ref().and_then(|t| t.initial.as_deref()));
        match labels {
            None => Ok(vec![system.basis_state(0)]),
            Some([]) => Err(bad("initial state list must not be empty")),
            Some(l) => Ok(indices(system, l)?.into_iter().map(|i| system.basis_state(i)).collect()),
        }
    }

    pub fn propagator_config(&self) -> Result<PropagatorConfig> {
        let mut c = PropagatorConfig::default();
        if let Some(p) = &self.propagator {
            if let Some(b) = &p.backend {
                c.backend = match b.as_str() {
                    "chebyshev" => Backend::Chebyshev,
                    "eigen" => Backend::Eigen,
                    other => return Err(bad(format!("propagator: unknown backend {other:?} (chebyshev, eigen)"))),
                };
            }
            if let Some(s) = &p.sampling {
                c.sampling = match s.as_str() {
                    "left" => FieldSampling::Left,
                    "midpoint" => FieldSampling::Midpoint,
                    "right" => FieldSampling::Right,
                    other => {
                        return Err(bad(format!("propagator: unknown sampling {other:?} (left, midpoint, right)")))
                    }
                };
            }
            if let Some(t) = p.tolerance {
                if !(t > 0.0 && t < 1.0) {
                    return Err(bad("propagator: tolerance must lie in (0, 1)"));
                }
                c.tolerance = t;
            }
        }
        Ok(c)
    }

    pub fn constraint_mode(&self, system: &LevelSystem) -> Result<ConstraintMode> {
        let Some(c) = &self.constraint else {
            return Ok(ConstraintMode::None);
        };
        match c.mode {
            ConstraintKind::None => Ok(ConstraintMode::None),
            ConstraintKind::Spectral => {
                let filters = c
                    .filters
                    .iter()
                    .enumerate()
                    .map(|(k, f)| {
                        let what = format!("constraint.filters[{k}]");
                        let omega =
                            frequency(system, &what, f.center_cm1, f.center_au, f.center_transition.as_ref(), f.center_factor)?;
                        let sigma = one_of(
                            &what,
                            vec![("sigma_cm1", f.sigma_cm1.map(cm1_to_au)), ("sigma_au", f.sigma_au)],
                        )?;
                        Ok(match f.role.unwrap_or(FilterRoleName::Filter) {
                            FilterRoleName::Filter => SpectralFilter::filter(omega, sigma, f.weight),
                            FilterRoleName::Pass => SpectralFilter::pass(omega, sigma, f.weight),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let bank = FilterBank::new(c.lambda_delta.unwrap_or(0.0), filters)?;
                let mut s = SpectralSettings::new(bank);
                s.basis_order = c.basis_order;
                if let Some(q) = c.quadrature {
                    s.quadrature = match q {
                        QuadratureName::GridTrapezoid => CouplingQuadrature::GridTrapezoid,
                        QuadratureName::HatMassMatrix => CouplingQuadrature::HatMassMatrix,
                    };
                }
                Ok(ConstraintMode::Spectral(s))
            }
            ConstraintKind::State => {
                let allowed = c.allowed.as_ref().ok_or_else(|| bad("constraint: state mode needs allowed"))?;
                let lambda_b = c.lambda_b_t.ok_or_else(|| bad("constraint: state mode needs lambda_b_t"))?;
                Ok(ConstraintMode::State {
                    projector: SubspaceProjector::new(system.dim(), indices(system, allowed)?)?,
                    lambda_b,
                })
            }
        }
    }

    /// The full optimization problem; `max_iter` overrides the stop rule.
    pub fn optimization_problem(&self, max_iter: Option<usize>) -> Result<OptimizationProblem> {
        let system = self.system()?;
        let grid = self.grid()?;
        let o = self.optimizer.as_ref().ok_or_else(|| bad("an [optimizer] block is required"))?;
        let target = self.target(&system)?;
        let initial = self.initial_states(&system, None)?;
        let guess = self.guess_pulse(&system)?;
        let constraint = self.constraint_mode(&system)?;
        let defaults = StopRule::default();
        let stop = StopRule {
            max_iterations: max_iter.or(o.max_iterations).unwrap_or(defaults.max_iterations),
            j_t_threshold: o.j_t_threshold.unwrap_or(defaults.j_t_threshold),
        };
        let mut p = OptimizationProblem::new(system, grid, initial, target, guess, o.lambda0)?
            .with_constraint(constraint)?
            .with_stop(stop);
        p.propagator = self.propagator_config()?;
        p.snapshot_every = o.snapshot_every;
        p.validate()?;
        Ok(p)
    }

    pub fn keep_intervals(&self, p: &PropagateConfig) -> Result<Option<Vec<(f64, f64)>>> {
        let list = match (&p.band_keep_cm1, &p.band_keep_au) {
            (Some(_), Some(_)) => return Err(bad("propagate: give either band_keep_cm1 or band_keep_au")),
            (Some(v), None) => v.iter().map(|[a, b]| (cm1_to_au(*a), cm1_to_au(*b))).collect::<Vec<_>>(),
            (None, Some(v)) => v.iter().map(|[a, b]| (*a, *b)).collect(),
            (None, None) => return Ok(None),
        };
        if let Some((a, b)) = list.iter().find(|(a, b)| !(a <= b && *a >= 0.0)) {
            return Err(bad(format!("propagate: keep interval [{a}, {b}] must satisfy 0 <= lo <= hi")));
        }
        Ok(Some(list))
    }

    pub fn merit(&self, system: &LevelSystem) -> Result<Merit> {
        let l = self.landscape.as_ref().ok_or_else(|| bad("a [landscape] block is required"))?;
        let (kind, rest) = l
            .merit
            .split_once(':')
            .ok_or_else(|| bad("landscape.merit must be population:<level> or coherence:<a>,<b>"))?;
        match kind {
            "population" => Ok(Merit::Population(system.index_of(rest.trim())?)),
            "coherence" => {
                let (a, b) = rest
                    .split_once(',')
                    .ok_or_else(|| bad("landscape.merit coherence needs two levels, e.g. coherence:3s,7p"))?;
                Ok(Merit::Coherence(system.index_of(a.trim())?, system.index_of(b.trim())?))
            }
            other => Err(bad(format!("landscape.merit: unknown kind {other:?}"))),
        }
    }

    pub fn landscape_tau(&self) -> Result<f64> {
        let l = self.landscape.as_ref().ok_or_else(|| bad("a [landscape] block is required"))?;
        duration("landscape", l.tau_fs, None, l.fwhm_fs)
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.as_ref().and_then(|o| o.dir.as_ref()).map(|d| self.resolve(d))
    }
}
