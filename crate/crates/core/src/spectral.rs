//! Spectral constraints on the field update: Gaussian frequency filters and
//! passes, the control penalty `J_a`, and the Fredholm equation that makes
//! the constrained update explicit.
//!
//! The penalty on a field change `d(t)` is
//!
//! ```text
//! J_a = lambda0 int d^2 / S dt + lambda_delta int d^2 dt
//!     + 1/(2 pi) int int d(t) K_s(t - t') d(t') dt dt'
//! ```
//!
//! where `K_s` is the smooth (filter) part of the kernel. Minimizing
//! `-2 int G d + J_a` pointwise gives the Fredholm equation of the second kind
//! `d(t) = I(t) - rho(t)/(2 pi) int K_s(t - t') d(t') dt'` with
//! `I = rho G` and `rho = S / (lambda0 + lambda_delta S)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{AdmissibilityReport, Error, Result};
use crate::grid::TimeGrid;

/// Gaussians are cut off beyond this many widths (`exp(-72)`).
const CUTOFF_WIDTHS: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterRole {
    /// Suppresses the band (raises the kernel spectrum).
    Filter,
    /// Favours the band (lowers the kernel spectrum).
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFilter {
    /// Centre frequency (a.u.).
    pub omega: f64,
    /// Gaussian width in frequency (a.u.).
    pub sigma: f64,
    /// Non-negative magnitude; the sign is taken from `role`.
    pub weight: f64,
    pub role: FilterRole,
}

impl SpectralFilter {
    pub fn filter(omega: f64, sigma: f64, weight: f64) -> Self {
        SpectralFilter {
            omega,
            sigma,
            weight,
            role: FilterRole::Filter,
        }
    }

    pub fn pass(omega: f64, sigma: f64, weight: f64) -> Self {
        SpectralFilter {
            omega,
            sigma,
            weight,
            role: FilterRole::Pass,
        }
    }

    /// `lambda_a^j`: negative for filters, positive for passes.
    pub fn signed_weight(&self) -> f64 {
        match self.role {
            FilterRole::Filter => -self.weight,
            FilterRole::Pass => self.weight,
        }
    }

    fn gaussian(&self, x: f64) -> f64 {
        (-0.5 * (x / self.sigma).powi(2)).exp()
    }
}

/// Frequency-domain kernel `lambda_delta - sum_j lambda_a^j / 2 [G_j(w - w_j) + G_j(w + w_j)]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterBank {
    /// Weight of the delta-function part of the kernel.
    pub lambda_delta: f64,
    pub filters: Vec<SpectralFilter>,
}

impl FilterBank {
    pub fn new(lambda_delta: f64, filters: Vec<SpectralFilter>) -> Result<Self> {
        if !(lambda_delta >= 0.0 && lambda_delta.is_finite()) {
            return Err(Error::config(format!(
                "spectral: delta-kernel weight must be finite and >= 0, got {lambda_delta}"
            )));
        }
        for (j, f) in filters.iter().enumerate() {
            if !(f.sigma > 0.0 && f.sigma.is_finite()) {
                return Err(Error::config(format!("spectral: filter #{j} needs sigma > 0")));
            }
            if !(f.omega >= 0.0 && f.omega.is_finite()) {
                return Err(Error::config(format!("spectral: filter #{j} needs omega >= 0")));
            }
            if !(f.weight >= 0.0 && f.weight.is_finite()) {
                return Err(Error::config(format!(
                    "spectral: filter #{j} weight must be a finite magnitude >= 0"
                )));
            }
        }
        Ok(FilterBank {
            lambda_delta,
            filters,
        })
    }

    /// No filter carries weight, so the smooth kernel vanishes.
    pub fn is_inactive(&self) -> bool {
        self.filters.iter().all(|f| f.weight == 0.0)
    }

    /// Time separation beyond which the smooth kernel is treated as zero.
    pub fn time_cutoff(&self) -> f64 {
        self.filters
            .iter()
            .filter(|f| f.weight != 0.0)
            .map(|f| CUTOFF_WIDTHS / f.sigma)
            .fold(0.0, f64::max)
    }
}

/// `K_bar(omega)`.
pub fn kernel_spectrum(bank: &FilterBank, omega: f64) -> f64 {
    bank.lambda_delta
        - bank
            .filters
            .iter()
            .map(|f| 0.5 * f.signed_weight() * (f.gaussian(omega - f.omega) + f.gaussian(omega + f.omega)))
            .sum::<f64>()
}

/// Smooth part of `K(dt)`; the delta part `2 pi lambda_delta delta(dt)` is
/// handled separately. Terms with `|dt| sigma_j >= 12` are dropped.
pub fn kernel_time(bank: &FilterBank, dt: f64) -> f64 {
    bank.filters
        .iter()
        .filter(|f| (dt * f.sigma).abs() < CUTOFF_WIDTHS)
        .map(|f| {
            -f.signed_weight()
                * (2.0 * PI).sqrt()
                * f.sigma
                * (f.omega * dt).cos()
                * (-0.5 * (f.sigma * dt).powi(2)).exp()
        })
        .sum()
}

/// Check the per-pass bound `w_j <= 2 lambda_delta` and that the sampled
/// kernel spectrum stays non-negative.
pub fn check_admissibility(bank: &FilterBank) -> Result<()> {
    let (wmin, kmin) = sampled_minimum(bank);
    for (j, f) in bank.filters.iter().enumerate() {
        if f.role == FilterRole::Pass && f.weight > 2.0 * bank.lambda_delta {
            return Err(Error::Admissibility(AdmissibilityReport {
                filter: Some(j),
                sampled_minimum: kmin,
                frequency_at_minimum: wmin,
                reason: format!(
                    "pass weight {} exceeds twice the delta-kernel weight {} (monotonicity bound w_j <= 2 lambda_delta)",
                    f.weight, bank.lambda_delta
                ),
            }));
        }
    }
    if kmin < -1e-12 {
        // blame the pass closest to the minimum
        let culprit = bank
            .filters
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == FilterRole::Pass)
            .min_by(|a, b| {
                (a.1.omega - wmin)
                    .abs()
                    .total_cmp(&(b.1.omega - wmin).abs())
            })
            .map(|(j, _)| j);
        return Err(Error::Admissibility(AdmissibilityReport {
            filter: culprit,
            sampled_minimum: kmin,
            frequency_at_minimum: wmin,
            reason: "kernel spectrum negative (overlapping passes)".into(),
        }));
    }
    Ok(())
}

/// Dense sampling of `K_bar` over `[0, max(omega_j + 12 sigma_j)]`.
fn sampled_minimum(bank: &FilterBank) -> (f64, f64) {
    if bank.filters.is_empty() {
        return (0.0, bank.lambda_delta);
    }
    let top = bank
        .filters
        .iter()
        .map(|f| f.omega + CUTOFF_WIDTHS * f.sigma)
        .fold(0.0, f64::max);
    let step = bank.filters.iter().map(|f| f.sigma).fold(f64::INFINITY, f64::min) / 16.0;
    let n = ((top / step).ceil() as usize).min(10_000_000);
    let mut best = (0.0, kernel_spectrum(bank, 0.0));
    let mut probe = |w: f64| {
        let k = kernel_spectrum(bank, w);
        if k < best.1 {
            best = (w, k);
        }
    };
    for i in 0..=n {
        probe(top * i as f64 / n as f64);
    }
    for f in &bank.filters {
        probe(f.omega);
    }
    best
}

/// `lambda0 / S(t)` amplitude penalty; `S` vanishes at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeConstraint {
    pub lambda0: f64,
    pub shape: Vec<f64>,
}

impl AmplitudeConstraint {
    pub fn new(lambda0: f64, shape: Vec<f64>) -> Result<Self> {
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(Error::config(format!("lambda0 must be positive, got {lambda0}")));
        }
        if shape.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::config("shape function must lie in [0, 1]"));
        }
        if shape.len() < 2 || shape[0] != 0.0 || shape[shape.len() - 1] != 0.0 {
            return Err(Error::config("shape function must vanish at t = 0 and t = T"));
        }
        Ok(AmplitudeConstraint { lambda0, shape })
    }

    /// `S(t) = sin^2(pi t / T)` on `grid`.
    pub fn sin2(lambda0: f64, grid: &TimeGrid) -> Result<Self> {
        Self::new(lambda0, grid.sin2_shape())
    }

    /// `rho(t) = S / (lambda0 + lambda_delta S)`, the factor multiplying the
    /// gradient in the update.
    pub fn update_factor(&self, lambda_delta: f64) -> Vec<f64> {
        self.shape
            .iter()
            .map(|&s| s / (self.lambda0 + lambda_delta * s))
            .collect()
    }
}

/// `J_a` for a field change on a grid, with the smooth kernel tabulated on
/// grid translations.
#[derive(Debug, Clone)]
pub struct ControlPenalty {
    grid: TimeGrid,
    amplitude: AmplitudeConstraint,
    lambda_delta: f64,
    /// `K_s(m dt)` for `m = 0 ..`; empty without active filters.
    table: Vec<f64>,
}

impl ControlPenalty {
    pub fn new(grid: TimeGrid, amplitude: AmplitudeConstraint, bank: Option<&FilterBank>) -> Result<Self> {
        if amplitude.shape.len() != grid.len() {
            return Err(Error::config("shape function not sampled on the time grid"));
        }
        let (lambda_delta, table) = match bank {
            Some(b) if !b.is_inactive() => {
                let m = ((b.time_cutoff() / grid.dt()).ceil() as usize + 1).min(grid.len());
                let dt = grid.dt();
                (b.lambda_delta, (0..m).map(|k| kernel_time(b, k as f64 * dt)).collect())
            }
            Some(b) => (b.lambda_delta, Vec::new()),
            None => (0.0, Vec::new()),
        };
        Ok(ControlPenalty {
            grid,
            amplitude,
            lambda_delta,
            table,
        })
    }

    pub fn amplitude(&self) -> &AmplitudeConstraint {
        &self.amplitude
    }

    pub fn lambda_delta(&self) -> f64 {
        self.lambda_delta
    }

    pub fn update_factor(&self) -> Vec<f64> {
        self.amplitude.update_factor(self.lambda_delta)
    }

    /// `J_a[d]` by the trapezoid rule; points where `S = 0` contribute nothing.
    pub fn evaluate(&self, delta: &[f64]) -> f64 {
        let w = self.grid.trapezoid_weights();
        let lambda0 = self.amplitude.lambda0;
        let mut local = 0.0;
        for ((d, s), wi) in delta.iter().zip(&self.amplitude.shape).zip(&w) {
            if *s > 0.0 {
                local += wi * d * d * lambda0 / s;
            }
            local += wi * self.lambda_delta * d * d;
        }
        let mut smooth = 0.0;
        if !self.table.is_empty() {
            let band = self.table.len();
            for i in 0..delta.len() {
                if delta[i] == 0.0 {
                    continue;
                }
                let lo = i.saturating_sub(band - 1);
                let hi = (i + band).min(delta.len());
                let mut acc = 0.0;
                for j in lo..hi {
                    acc += self.table[i.abs_diff(j)] * w[j] * delta[j];
                }
                smooth += w[i] * delta[i] * acc;
            }
        }
        local + smooth / (2.0 * PI)
    }
}

/// Hat function `alpha_j(s) = max(0, 1 - N |s - j/N|)` on `[0, 1]`.
pub fn hat(order: usize, j: usize, s: f64) -> f64 {
    (1.0 - (order as f64 * s - j as f64).abs()).max(0.0)
}

/// Closed-form Gram matrix `A_ik = int_0^1 alpha_i alpha_k ds` of the hat basis.
pub fn hat_mass_matrix(order: usize) -> DMatrix<f64> {
    let n = order as f64;
    let mut a = DMatrix::zeros(order + 1, order + 1);
    for i in 0..=order {
        a[(i, i)] = if i == 0 || i == order { 1.0 / (3.0 * n) } else { 2.0 / (3.0 * n) };
        if i < order {
            a[(i, i + 1)] = 1.0 / (6.0 * n);
            a[(i + 1, i)] = 1.0 / (6.0 * n);
        }
    }
    a
}

/// How the integrals over the second kernel argument are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingQuadrature {
    /// Composite trapezoid on the propagation grid, with the kernel evaluated
    /// exactly at every grid point. For `N = n_points - 1` this coincides
    /// with the Nyström method on the grid.
    #[default]
    GridTrapezoid,
    /// Kernel interpolated in the hat basis in both arguments, giving
    /// `C = K A` with the closed-form Gram matrix `A`.
    HatMassMatrix,
}

/// Kernel of the unit-interval equation `x(s) = I(s) + int_0^1 k(s, s') x(s') ds'`,
/// `k(s, s') = -T rho(T s) K_s(T (s - s')) / (2 pi)`.
#[derive(Debug, Clone)]
struct UnitKernel {
    grid: TimeGrid,
    rho: Vec<f64>,
    bank: FilterBank,
}

impl UnitKernel {
    fn rho_at(&self, s: f64) -> f64 {
        let x = s * (self.rho.len() - 1) as f64;
        let i = (x.floor() as usize).min(self.rho.len() - 2);
        let f = x - i as f64;
        self.rho[i] * (1.0 - f) + self.rho[i + 1] * f
    }

    /// `-T K_s(T (s - s')) / (2 pi)` without the `rho` row factor.
    fn translation(&self, s: f64, s2: f64) -> f64 {
        let t = self.grid.t_final();
        -t * kernel_time(&self.bank, t * (s - s2)) / (2.0 * PI)
    }
}

/// Discretized degenerate-kernel system `(1 - gamma C) X = gamma b`.
#[derive(Debug, Clone)]
pub struct FredholmOperator {
    grid: TimeGrid,
    order: usize,
    quadrature: CouplingQuadrature,
    matrix: DMatrix<f64>,
    /// Banded rows `(first grid index, w_m k(s_j, s_m))` for the right-hand side
    /// (trapezoid quadrature), or dense nodal kernel rows (hat quadrature).
    rows: Vec<(usize, Vec<f64>)>,
}

impl FredholmOperator {
    pub fn new(
        bank: &FilterBank,
        amplitude: &AmplitudeConstraint,
        grid: &TimeGrid,
        order: usize,
        quadrature: CouplingQuadrature,
    ) -> Result<Self> {
        if order < 1 || order > grid.len() - 1 {
            return Err(Error::config(format!(
                "spectral: basis order {order} must lie in 1..={} for {} grid points",
                grid.len() - 1,
                grid.len()
            )));
        }
        if amplitude.shape.len() != grid.len() {
            return Err(Error::config("spectral: shape function not sampled on the time grid"));
        }
        let kernel = UnitKernel {
            grid: *grid,
            rho: amplitude.update_factor(bank.lambda_delta),
            bank: bank.clone(),
        };
        let n = grid.len();
        let h = 1.0 / (n - 1) as f64;
        let cutoff = bank.time_cutoff() / grid.t_final();
        let nodes: Vec<f64> = (0..=order).map(|j| j as f64 / order as f64).collect();
        let mut matrix = DMatrix::zeros(order + 1, order + 1);
        let mut rows = Vec::with_capacity(order + 1);
        match quadrature {
            CouplingQuadrature::GridTrapezoid => {
                for (j, &sj) in nodes.iter().enumerate() {
                    let rho = kernel.rho_at(sj);
                    let lo = ((sj - cutoff) / h).floor().max(0.0) as usize;
                    let hi = (((sj + cutoff) / h).ceil() as usize).min(n - 1);
                    let mut row = Vec::with_capacity(hi + 1 - lo);
                    for m in lo..=hi {
                        let sm = m as f64 * h;
                        let w = if m == 0 || m == n - 1 { 0.5 * h } else { h };
                        let v = if rho == 0.0 { 0.0 } else { w * rho * kernel.translation(sj, sm) };
                        row.push(v);
                        if v != 0.0 {
                            // hat functions overlapping s_m
                            let x = sm * order as f64;
                            let k0 = x.floor() as usize;
                            for k in [k0, k0 + 1] {
                                if k <= order {
                                    let a = hat(order, k, sm);
                                    if a != 0.0 {
                                        matrix[(j, k)] += v * a;
                                    }
                                }
                            }
                        }
                    }
                    rows.push((lo, row));
                }
            }
            CouplingQuadrature::HatMassMatrix => {
                let mut nodal = DMatrix::zeros(order + 1, order + 1);
                for (j, &sj) in nodes.iter().enumerate() {
                    let rho = kernel.rho_at(sj);
                    for (i, &si) in nodes.iter().enumerate() {
                        if (sj - si).abs() < cutoff && rho != 0.0 {
                            nodal[(j, i)] = rho * kernel.translation(sj, si);
                        }
                    }
                }
                matrix = &nodal * hat_mass_matrix(order);
                for j in 0..=order {
                    rows.push((0, nodal.row(j).iter().copied().collect()));
                }
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
                residual: f64::NAN,
            });
        }
        Ok(FredholmOperator {
            grid: *grid,
            order,
            quadrature,
            matrix,
            rows,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn quadrature(&self) -> CouplingQuadrature {
        self.quadrature
    }

    /// Coupling matrix `C`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Right-hand side `b` for an inhomogeneity sampled on the grid.
    pub fn rhs(&self, inhomogeneity: &[f64]) -> DVector<f64> {
        match self.quadrature {
            CouplingQuadrature::GridTrapezoid => DVector::from_iterator(
                self.order + 1,
                self.rows.iter().map(|(lo, row)| {
                    row.iter().zip(&inhomogeneity[*lo..]).map(|(k, i)| k * i).sum::<f64>()
                }),
            ),
            CouplingQuadrature::HatMassMatrix => {
                let beta = self.hat_projections(inhomogeneity);
                DVector::from_iterator(
                    self.order + 1,
                    self.rows
                        .iter()
                        .map(|(_, row)| row.iter().zip(beta.iter()).map(|(k, b)| k * b).sum::<f64>()),
                )
            }
        }
    }

    /// `beta_i = int_0^1 I(s) alpha_i(s) ds` by the trapezoid rule.
    fn hat_projections(&self, inhomogeneity: &[f64]) -> DVector<f64> {
        let n = self.grid.len();
        let h = 1.0 / (n - 1) as f64;
        let mut beta = DVector::zeros(self.order + 1);
        for (m, v) in inhomogeneity.iter().enumerate() {
            let w = if m == 0 || m == n - 1 { 0.5 * h } else { h };
            let s = m as f64 * h;
            let k0 = (s * self.order as f64).floor() as usize;
            for k in [k0, k0 + 1] {
                if k <= self.order {
                    beta[k] += w * v * hat(self.order, k, s);
                }
            }
        }
        beta
    }

    /// `d(t_m) = I(t_m) + sum_j X_j alpha_j(t_m)`.
    fn reconstruct(&self, inhomogeneity: &[f64], x: &DVector<f64>) -> Vec<f64> {
        let n = self.grid.len();
        let h = 1.0 / (n - 1) as f64;
        inhomogeneity
            .iter()
            .enumerate()
            .map(|(m, v)| {
                let s = m as f64 * h;
                let k0 = (s * self.order as f64).floor() as usize;
                let mut out = *v;
                for k in [k0, k0 + 1] {
                    if k <= self.order {
                        out += x[k] * hat(self.order, k, s);
                    }
                }
                out
            })
            .collect()
    }
}

/// An assembled instance for one inhomogeneity.
#[derive(Debug, Clone)]
pub struct FredholmSystem {
    pub operator: FredholmOperator,
    pub rhs: DVector<f64>,
    pub inhomogeneity: Vec<f64>,
    /// Scale of the integral term; the kernel carries all prefactors, so 1.
    pub gamma: f64,
}

/// Assemble the degenerate-kernel system with grid-trapezoid couplings.
pub fn assemble(
    bank: &FilterBank,
    amplitude: &AmplitudeConstraint,
    inhomogeneity: &[f64],
    grid: &TimeGrid,
    order: usize,
) -> Result<FredholmSystem> {
    if inhomogeneity.len() != grid.len() {
        return Err(Error::config("spectral: inhomogeneity not sampled on the time grid"));
    }
    let operator = FredholmOperator::new(bank, amplitude, grid, order, CouplingQuadrature::default())?;
    let rhs = operator.rhs(inhomogeneity);
    Ok(FredholmSystem {
        operator,
        rhs,
        inhomogeneity: inhomogeneity.to_vec(),
        gamma: 1.0,
    })
}

/// Solve `(1 - gamma C) X = gamma b` and return `d = I + sum X_j alpha_j` on the grid.
pub fn solve(system: &FredholmSystem) -> Result<Vec<f64>> {
    if system.gamma == 0.0 {
        return Ok(system.inhomogeneity.clone());
    }
    let solver = FredholmSolver::with_gamma(system.operator.clone(), system.gamma)?;
    solver.solve_rhs(&system.inhomogeneity, &system.rhs * system.gamma)
}

/// Factorized `1 - gamma C`, reusable across inhomogeneities.
#[derive(Debug, Clone)]
pub struct FredholmSolver {
    operator: FredholmOperator,
    gamma: f64,
    system: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
}

impl FredholmSolver {
    pub fn new(operator: FredholmOperator) -> Result<Self> {
        Self::with_gamma(operator, 1.0)
    }

    pub fn with_gamma(operator: FredholmOperator, gamma: f64) -> Result<Self> {
        let size = operator.order + 1;
        let system = DMatrix::identity(size, size) - operator.matrix() * gamma;
        let lu = system.clone().lu();
        let diag = lu.u().diagonal();
        let (lo, hi) = diag
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(v.abs()), h.max(v.abs())));
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !condition.is_finite() || condition > 1e14 {
            return Err(Error::IllConditioned {
                condition,
                residual: f64::NAN,
            });
        }
        Ok(FredholmSolver {
            operator,
            gamma,
            system,
            lu,
            condition,
        })
    }

    pub fn operator(&self) -> &FredholmOperator {
        &self.operator
    }

    /// Ratio of extreme pivots of the LU factorization.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, inhomogeneity: &[f64]) -> Result<Vec<f64>> {
        if inhomogeneity.len() != self.operator.grid.len() {
            return Err(Error::config("spectral: inhomogeneity not sampled on the time grid"));
        }
        let rhs = self.operator.rhs(inhomogeneity) * self.gamma;
        self.solve_rhs(inhomogeneity, rhs)
    }

    fn solve_rhs(&self, inhomogeneity: &[f64], rhs: DVector<f64>) -> Result<Vec<f64>> {
        let x = self.lu.solve(&rhs).ok_or(Error::IllConditioned {
            condition: self.condition,
            residual: f64::NAN,
        })?;
        let scale = rhs.amax().max(x.amax()).max(f64::MIN_POSITIVE);
        let residual = (&self.system * &x - &rhs).amax() / scale;
        if !(residual <= 1e-8) {
            return Err(Error::IllConditioned {
                condition: self.condition,
                residual,
            });
        }
        Ok(self.operator.reconstruct(inhomogeneity, &x))
    }
}
