//! Few-level systems `H[eps] = H0 + mu * eps(t)`, subspace projectors,
//! final-time targets and analytic pulse shapes.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Pulse, TimeGrid};
use crate::units::cm1_to_au;
use crate::State;

const SODIUM_TABLE: &str = include_str!("../data/sodium.levels");
const SODIUM_TABLE_NAME: &str = "sodium.levels";

/// Diagonal field-free energies plus a real symmetric dipole matrix.
///
/// Energies are stored in atomic units as offsets from the lowest level.
#[derive(Debug, Clone)]
pub struct LevelSystem {
    labels: Vec<String>,
    energies: Vec<f64>,
    dipoles: DMatrix<f64>,
    /// Nonzero upper-triangle dipole entries `(i, j, mu_ij)` with `i < j`.
    couplings: Vec<(usize, usize, f64)>,
    dipole_norm: f64,
}

impl LevelSystem {
    pub fn new(labels: Vec<String>, energies_au: Vec<f64>, dipoles: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::config("level system needs at least one level"));
        }
        if energies_au.len() != n || dipoles.nrows() != n || dipoles.ncols() != n {
            return Err(Error::config(format!(
                "level system dimension mismatch: {} labels, {} energies, {}x{} dipoles",
                n,
                energies_au.len(),
                dipoles.nrows(),
                dipoles.ncols()
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::config(format!("duplicate level label '{a}'")));
            }
        }
        if energies_au.iter().any(|e| !e.is_finite()) || dipoles.iter().any(|d| !d.is_finite()) {
            return Err(Error::config("level energies and dipoles must be finite"));
        }
        let mut couplings = Vec::new();
        for i in 0..n {
            if dipoles[(i, i)] != 0.0 {
                return Err(Error::config(format!(
                    "dipole diagonal entry for '{}' must be zero",
                    labels[i]
                )));
            }
            for j in i + 1..n {
                if dipoles[(i, j)] != dipoles[(j, i)] {
                    return Err(Error::config(format!(
                        "dipole matrix not symmetric at ('{}', '{}')",
                        labels[i], labels[j]
                    )));
                }
                if dipoles[(i, j)] != 0.0 {
                    couplings.push((i, j, dipoles[(i, j)]));
                }
            }
        }
        let ground = energies_au.iter().cloned().fold(f64::INFINITY, f64::min);
        let energies = energies_au.iter().map(|e| e - ground).collect();
        let dipole_norm = if couplings.is_empty() {
            0.0
        } else {
            dipoles
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        };
        Ok(LevelSystem {
            labels,
            energies,
            dipoles,
            couplings,
            dipole_norm,
        })
    }

    /// Parse the columnar level-table format.
    ///
    /// ```text
    /// # comment
    /// label energy_cm1
    /// 3s 0.0
    /// 3p 16956.0
    /// label_i label_j mu_au
    /// 3s 3p 2.49
    /// ```
    /// Dipole pairs that are not listed are zero.
    pub fn from_table_str(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::DataFile {
            file: source.to_string(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        match lines.next() {
            Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == ["label", "energy_cm1"] => {}
            Some((n, l)) => {
                return Err(err(n, format!("expected header 'label energy_cm1', found '{l}'")))
            }
            None => return Err(err(0, "empty level table".into())),
        }

        let mut labels = Vec::new();
        let mut energies = Vec::new();
        let mut pairs = Vec::new();
        let mut in_dipoles = false;
        for (n, l) in lines {
            let cols: Vec<&str> = l.split_whitespace().collect();
            if !in_dipoles && cols == ["label_i", "label_j", "mu_au"] {
                in_dipoles = true;
                continue;
            }
            if !in_dipoles {
                if cols.len() != 2 {
                    return Err(err(n, format!("expected 'label energy_cm1', found '{l}'")));
                }
                let e: f64 = cols[1]
                    .parse()
                    .map_err(|_| err(n, format!("invalid energy '{}'", cols[1])))?;
                if labels.iter().any(|x: &String| x == cols[0]) {
                    return Err(err(n, format!("duplicate level '{}'", cols[0])));
                }
                labels.push(cols[0].to_string());
                energies.push(cm1_to_au(e));
            } else {
                if cols.len() != 3 {
                    return Err(err(n, format!("expected 'label_i label_j mu_au', found '{l}'")));
                }
                let find = |name: &str| {
                    labels
                        .iter()
                        .position(|x| x == name)
                        .ok_or_else(|| err(n, format!("unknown level '{name}' in dipole block")))
                };
                let (i, j) = (find(cols[0])?, find(cols[1])?);
                if i == j {
                    return Err(err(n, "diagonal dipole entries are not allowed".into()));
                }
                let mu: f64 = cols[2]
                    .parse()
                    .map_err(|_| err(n, format!("invalid dipole '{}'", cols[2])))?;
                if pairs.iter().any(|&(a, b, _)| (a, b) == (i, j) || (a, b) == (j, i)) {
                    return Err(err(n, format!("duplicate dipole pair {} {}", cols[0], cols[1])));
                }
                pairs.push((i, j, mu));
            }
        }
        if labels.is_empty() {
            return Err(err(0, "no levels listed".into()));
        }
        let d = labels.len();
        let mut dipoles = DMatrix::zeros(d, d);
        for (i, j, mu) in pairs {
            dipoles[(i, j)] = mu;
            dipoles[(j, i)] = mu;
        }
        LevelSystem::new(labels, energies, dipoles).map_err(|e| err(0, e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_table_str(&text, &path.display().to_string())
    }

    /// Render in the level-table format; `from_table_str` reads it back.
    pub fn to_table_string(&self) -> String {
        let mut out = String::from("label energy_cm1\n");
        for (l, e) in self.labels.iter().zip(&self.energies) {
            let _ = writeln!(out, "{l} {:.17e}", crate::units::au_to_cm1(*e));
        }
        out.push_str("label_i label_j mu_au\n");
        for &(i, j, mu) in &self.couplings {
            let _ = writeln!(out, "{} {} {:.17e}", self.labels[i], self.labels[j], mu);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dipoles(&self) -> &DMatrix<f64> {
        &self.dipoles
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    /// Spectral norm of the dipole matrix.
    pub fn dipole_norm(&self) -> f64 {
        self.dipole_norm
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::config(format!("unknown level '{label}'")))
    }

    /// `E_b - E_a` in atomic units.
    pub fn transition_frequency(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.energies[self.index_of(b)?] - self.energies[self.index_of(a)?])
    }

    pub fn basis_state(&self, index: usize) -> State {
        let mut s = DVector::zeros(self.dim());
        s[index] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn hamiltonian(&self, eps: f64) -> DMatrix<f64> {
        let mut h = &self.dipoles * eps;
        for (i, e) in self.energies.iter().enumerate() {
            h[(i, i)] = *e;
        }
        h
    }

    /// `y = H[eps] x`.
    pub fn apply_hamiltonian(&self, eps: f64, x: &[Complex64], y: &mut [Complex64]) {
        for ((yi, xi), e) in y.iter_mut().zip(x).zip(&self.energies) {
            *yi = xi * *e;
        }
        for &(i, j, mu) in &self.couplings {
            let m = mu * eps;
            y[i] += x[j] * m;
            y[j] += x[i] * m;
        }
    }

    /// `y = mu x`.
    pub fn apply_dipole(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for &(i, j, mu) in &self.couplings {
            y[i] += x[j] * mu;
            y[j] += x[i] * mu;
        }
    }

    /// `<a| mu |b>`.
    pub fn dipole_matrix_element(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(i, j, mu) in &self.couplings {
            acc += (a[i].conj() * b[j] + a[j].conj() * b[i]) * mu;
        }
        acc
    }

    /// Interval guaranteed to contain the spectrum of `H[eps]` (Weyl bound).
    pub fn spectral_bounds(&self, eps: f64) -> (f64, f64) {
        let (lo, hi) = self
            .energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), e| (l.min(*e), h.max(*e)));
        let shift = eps.abs() * self.dipole_norm;
        (lo - shift, hi + shift)
    }
}

/// The bundled 8-level sodium model: 3s, 4s and np (n = 3..8), s<->p dipoles only.
pub fn build_sodium_system() -> Result<LevelSystem> {
    LevelSystem::from_table_str(SODIUM_TABLE, SODIUM_TABLE_NAME)
}

/// Spectroscopic data for a ground and an excited vibrational manifold.
#[derive(Debug, Clone)]
pub struct TwoManifoldTable {
    pub ground_cm1: Vec<f64>,
    pub excited_cm1: Vec<f64>,
    /// `dipoles[(v, w)]` couples ground level `v` to excited level `w` (a.u.).
    pub dipoles: DMatrix<f64>,
}

/// Anharmonic oscillator term values `T + we (v+1/2) - wexe (v+1/2)^2`.
#[derive(Debug, Clone, Copy)]
pub struct VibrationalConstants {
    pub term_cm1: f64,
    pub we_cm1: f64,
    pub wexe_cm1: f64,
}

impl VibrationalConstants {
    pub fn level(&self, v: usize) -> f64 {
        let x = v as f64 + 0.5;
        self.term_cm1 + self.we_cm1 * x - self.wexe_cm1 * x * x
    }
}

/// Parameters of the synthetic two-manifold model: anharmonic term values with
/// Franck-Condon dipoles from displaced, distorted harmonic oscillators.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticManifolds {
    pub ground: VibrationalConstants,
    pub excited: VibrationalConstants,
    /// Displacement of the excited potential in ground-oscillator length units.
    pub displacement: f64,
    /// Electronic transition dipole (a.u.), multiplied by the overlaps.
    pub electronic_dipole: f64,
}

impl SyntheticManifolds {
    /// A Rb2-like parametrization in which the ground-manifold spacing puts
    /// `v=10` at 562 cm^-1 above `v=0` and the excited term value is chosen so
    /// that `omega(v=0, v'=10) = 11127 cm^-1` and `omega(v=10, v'=10) = 10565 cm^-1`.
    /// The displacement is large enough that both `v=0` and `v=10` couple
    /// to the excited levels around `v'=10`.
    pub fn rb2_like() -> Self {
        let ground = VibrationalConstants {
            term_cm1: 0.0,
            we_cm1: 57.31,
            wexe_cm1: (573.1 - 562.0) / 110.0,
        };
        let mut excited = VibrationalConstants {
            term_cm1: 0.0,
            we_cm1: 44.58,
            wexe_cm1: 0.12,
        };
        excited.term_cm1 = 11127.0 + ground.level(0) - excited.level(10);
        SyntheticManifolds {
            ground,
            excited,
            displacement: 5.0,
            electronic_dipole: 3.0,
        }
    }

    pub fn table(&self, ground_levels: usize, excited_levels: usize) -> TwoManifoldTable {
        let ground_cm1 = (0..ground_levels).map(|v| self.ground.level(v)).collect();
        let excited_cm1 = (0..excited_levels).map(|v| self.excited.level(v)).collect();
        let ratio = self.excited.we_cm1 / self.ground.we_cm1;
        let overlaps = franck_condon_overlaps(ground_levels, excited_levels, ratio, self.displacement);
        TwoManifoldTable {
            ground_cm1,
            excited_cm1,
            dipoles: overlaps * self.electronic_dipole,
        }
    }
}

/// Normalized Hermite functions `h_0..h_{n-1}` at `x`.
fn hermite_functions(n: usize, x: f64, out: &mut [f64]) {
    if n == 0 {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for k in 1..n - 1 {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Overlaps `<v | v'>` between oscillator eigenfunctions of frequency 1 and of
/// frequency `ratio` displaced by `displacement` (dimensionless coordinates).
pub fn franck_condon_overlaps(
    ground_levels: usize,
    excited_levels: usize,
    ratio: f64,
    displacement: f64,
) -> DMatrix<f64> {
    let nmax = ground_levels.max(excited_levels);
    let extent = (2.0 * nmax as f64 + 1.0).sqrt() * (1.0 + 1.0 / ratio.sqrt()) + displacement.abs() + 12.0;
    let points = 6000;
    let h = 2.0 * extent / (points - 1) as f64;
    let scale = ratio.sqrt();
    let norm = ratio.powf(0.25);
    let mut g = vec![0.0; nmax];
    let mut e = vec![0.0; nmax];
    let mut s = DMatrix::zeros(ground_levels, excited_levels);
    for p in 0..points {
        let x = -extent + p as f64 * h;
        hermite_functions(ground_levels, x, &mut g);
        hermite_functions(excited_levels, scale * (x - displacement), &mut e);
        for v in 0..ground_levels {
            for w in 0..excited_levels {
                s[(v, w)] += h * g[v] * norm * e[w];
            }
        }
    }
    s
}

/// Two vibrational manifolds coupled only across manifolds. Levels are labelled
/// `g0, g1, ...` (ground) and `e0, e1, ...` (excited).
pub fn build_two_manifold_system(
    ground_levels: usize,
    excited_levels: usize,
    data: &TwoManifoldTable,
) -> Result<LevelSystem> {
    if data.ground_cm1.len() != ground_levels
        || data.excited_cm1.len() != excited_levels
        || data.dipoles.nrows() != ground_levels
        || data.dipoles.ncols() != excited_levels
    {
        return Err(Error::config(format!(
            "two-manifold table has {} ground / {} excited levels and a {}x{} dipole block, expected {}/{}",
            data.ground_cm1.len(),
            data.excited_cm1.len(),
            data.dipoles.nrows(),
            data.dipoles.ncols(),
            ground_levels,
            excited_levels
        )));
    }
    let d = ground_levels + excited_levels;
    let mut labels: Vec<String> = (0..ground_levels).map(|v| format!("g{v}")).collect();
    labels.extend((0..excited_levels).map(|v| format!("e{v}")));
    let energies = data
        .ground_cm1
        .iter()
        .chain(&data.excited_cm1)
        .map(|&e| cm1_to_au(e))
        .collect();
    let mut dipoles = DMatrix::zeros(d, d);
    for v in 0..ground_levels {
        for w in 0..excited_levels {
            let mu = data.dipoles[(v, w)];
            dipoles[(v, ground_levels + w)] = mu;
            dipoles[(ground_levels + w, v)] = mu;
        }
    }
    LevelSystem::new(labels, energies, dipoles)
}

/// Orthogonal projector onto a set of basis levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceProjector {
    dim: usize,
    members: Vec<usize>,
}

impl SubspaceProjector {
    pub fn new(dim: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&m) = members.iter().find(|&&m| m >= dim) {
            return Err(Error::config(format!(
                "projector member {m} outside a {dim}-level system"
            )));
        }
        Ok(SubspaceProjector { dim, members })
    }

    pub fn from_labels<S: AsRef<str>>(system: &LevelSystem, labels: &[S]) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|l| system.index_of(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(system.dim(), idx)
    }

    pub fn identity(dim: usize) -> Self {
        SubspaceProjector {
            dim,
            members: (0..dim).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn rank(&self) -> usize {
        self.members.len()
    }

    /// `out = P x`.
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for &m in &self.members {
            out[m] = x[m];
        }
    }

    pub fn apply(&self, x: &State) -> State {
        let mut out = DVector::zeros(self.dim);
        self.apply_into(x.as_slice(), out.as_mut_slice());
        out
    }

    /// `<x|P|x>`.
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        self.members.iter().map(|&m| x[m].norm_sqr()).sum()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.dim, self.dim);
        for &m in &self.members {
            p[(m, m)] = 1.0;
        }
        p
    }
}

/// Final-time target. Both forms are `J_T = 1 - F` with `F` a convex
/// quadratic form in the state, so `J_T` lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// `J_T = 1 - |<phi|psi(T)>|^2` for a unit vector `phi`.
    Overlap(State),
    /// `J_T = 1 - <psi(T)|P|psi(T)>`.
    Population(SubspaceProjector),
}

impl TargetSpec {
    /// Overlap target; `target` is normalized here.
    pub fn overlap(target: State) -> Result<Self> {
        let n = target.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::config("overlap target vector must be nonzero and finite"));
        }
        Ok(TargetSpec::Overlap(target / Complex64::new(n, 0.0)))
    }

    pub fn population(projector: SubspaceProjector) -> Self {
        TargetSpec::Population(projector)
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Overlap(phi) => phi.len(),
            TargetSpec::Population(p) => p.dim(),
        }
    }

    /// Figure of merit `F = 1 - J_T`, computed without clamping.
    pub fn fidelity(&self, psi: &[Complex64]) -> f64 {
        match self {
            TargetSpec::Overlap(phi) => overlap(phi.as_slice(), psi).norm_sqr(),
            TargetSpec::Population(p) => p.expectation(psi),
        }
    }

    pub fn functional(&self, psi: &[Complex64]) -> f64 {
        (1.0 - self.fidelity(psi)).clamp(0.0, 1.0)
    }

    /// `chi(T) = -dJ_T / d<psi|`.
    pub fn adjoint_seed(&self, psi: &[Complex64]) -> State {
        match self {
            TargetSpec::Overlap(phi) => phi * overlap(phi.as_slice(), psi),
            TargetSpec::Population(p) => {
                let mut out = DVector::zeros(psi.len());
                p.apply_into(psi, out.as_mut_slice());
                out
            }
        }
    }
}

/// `<a|b>`.
pub fn overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Adjoint boundary conditions for each final state.
pub fn target_adjoint_seed(target: &TargetSpec, finals: &[State]) -> Result<Vec<State>> {
    finals
        .iter()
        .enumerate()
        .map(|(k, psi)| {
            if psi.len() != target.dim() {
                return Err(Error::config(format!(
                    "final state {k} has dimension {}, target expects {}",
                    psi.len(),
                    target.dim()
                )));
            }
            let n = psi.norm();
            if (n - 1.0).abs() > 1e-10 {
                return Err(Error::config(format!(
                    "final state {k} not normalized (norm {n:.3e})"
                )));
            }
            Ok(target.adjoint_seed(psi.as_slice()))
        })
        .collect()
}

/// Gaussian envelope `exp(-(t - center)^2 / (2 tau^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEnvelope {
    pub center: f64,
    pub tau: f64,
}

impl GaussianEnvelope {
    pub fn at(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.tau;
        (-0.5 * x * x).exp()
    }
}

/// Two-parameter field family used for the sodium landscape:
/// `E(t) = g(t) { E1 [cos(w_a t) + cos(w_b t)] + E2 cos(w_2 t) }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParametrization {
    /// One-photon amplitude (a.u.).
    pub e1: f64,
    /// Two-photon amplitude (a.u.).
    pub e2: f64,
    /// Gaussian width of the field envelope (a.u. time).
    pub tau: f64,
    pub omega_one_photon_a: f64,
    pub omega_one_photon_b: f64,
    pub omega_two_photon: f64,
}

impl PulseParametrization {
    /// Carriers `omega(3s,3p)`, `omega(3p,4s)` and `omega(3s,4s)/2` from a
    /// system with levels labelled `3s`, `3p`, `4s`.
    pub fn sodium(system: &LevelSystem, e1: f64, e2: f64, tau: f64) -> Result<Self> {
        Ok(PulseParametrization {
            e1,
            e2,
            tau,
            omega_one_photon_a: system.transition_frequency("3s", "3p")?,
            omega_one_photon_b: system.transition_frequency("3p", "4s")?,
            omega_two_photon: 0.5 * system.transition_frequency("3s", "4s")?,
        })
    }

    pub fn with_amplitudes(&self, e1: f64, e2: f64) -> Self {
        PulseParametrization { e1, e2, ..*self }
    }
}

/// Sample the parametrized field with the envelope centred at `T/2`.
pub fn parametrized_field(p: &PulseParametrization, grid: &TimeGrid) -> Result<Pulse> {
    if !(p.tau > 0.0) {
        return Err(Error::config("envelope width tau must be positive"));
    }
    let env = GaussianEnvelope {
        center: 0.5 * grid.t_final(),
        tau: p.tau,
    };
    Ok(Pulse::from_fn(*grid, |t| {
        env.at(t)
            * (p.e1 * ((p.omega_one_photon_a * t).cos() + (p.omega_one_photon_b * t).cos())
                + p.e2 * (p.omega_two_photon * t).cos())
    }))
}

/// Cosine carrier under a Gaussian envelope of width `tau` centred at `T/2`.
pub fn gaussian_guess_pulse(
    center_frequency: f64,
    amplitude: f64,
    tau: f64,
    grid: &TimeGrid,
) -> Result<Pulse> {
    if !(tau > 0.0 && tau < grid.t_final()) {
        return Err(Error::config(format!(
            "guess envelope width {tau} must lie in (0, T = {})",
            grid.t_final()
        )));
    }
    if !(amplitude >= 0.0) {
        return Err(Error::config("guess amplitude must be non-negative"));
    }
    let env = GaussianEnvelope {
        center: 0.5 * grid.t_final(),
        tau,
    };
    Ok(Pulse::from_fn(*grid, |t| {
        amplitude * env.at(t) * (center_frequency * t).cos()
    }))
}
