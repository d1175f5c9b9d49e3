//! Strang split-step evolution of `i u_t + u_xx + |u|² u = 0` and the
//! resonant decomposition of the cubic term.
//!
//! A step is `L(dt/2) ∘ N(dt) ∘ L(dt/2)` where `L` is the exact free
//! propagator and `N(dt): u ↦ u e^{i(|u|² − shift) dt}` is the exact flow of
//! the pointwise part. Both are L² isometries on the grid; dealiasing by
//! truncation is the only channel through which mass can change.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{
    analyze_in_place, inverse_transform, propagate_turns, quadratic_phase_turns,
    synthesize_in_place, FourierField, GridSpec, SpatialField,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("time step {0} must be positive and at most 1e-2")]
    BadTimeStep(f64),
    #[error("snapshot times must be finite, nonnegative and sorted")]
    BadSnapshots,
    #[error("initial datum has non-finite coefficients")]
    NonFiniteDatum,
    #[error("solution became non-finite at step {step} (t = {t}); {} healthy snapshot(s) kept", partial.snapshots.len())]
    Blowup {
        step: usize,
        t: f64,
        partial: EvolutionResult,
    },
    #[error("time {0} is not among the snapshot times")]
    MissingSnapshot(f64),
}

/// How the pointwise product is protected against aliasing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    /// Zero modes with `|k| > n/3` before and after the product.
    TwoThirdsRule,
    /// Evaluate the product on a grid with twice the modes, then truncate.
    #[default]
    ZeroPadding2x,
    /// Evaluate on the solution grid; exact isometry, aliased product.
    None,
}

impl Dealias {
    pub fn name(&self) -> &'static str {
        match self {
            Dealias::TwoThirdsRule => "two-thirds-rule",
            Dealias::ZeroPadding2x => "zero-padding-2x",
            Dealias::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Requested step; each segment between snapshots uses the largest step
    /// not exceeding this that divides the segment evenly.
    pub dt: f64,
    pub dealias: Dealias,
    pub snapshot_times: Vec<f64>,
    /// Constant subtracted from `|u|²` in the pointwise flow. Zero for the
    /// equation as stated; `P` gives the gauge-transformed equation.
    #[serde(default)]
    pub gauge_shift: f64,
    /// Record the Hamiltonian every this many steps (0 disables).
    #[serde(default)]
    pub energy_stride: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, dealias: Dealias, snapshot_times: Vec<f64>) -> Self {
        Self {
            dt,
            dealias,
            snapshot_times,
            gauge_shift: 0.0,
            energy_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(SolverError::BadTimeStep(self.dt));
        }
        let ok = self.snapshot_times.iter().all(|t| t.is_finite() && *t >= 0.0)
            && self.snapshot_times.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(SolverError::BadSnapshots);
        }
        Ok(())
    }
}

/// Largest step keeping `k_max² · dt` below `π`, the threshold past which
/// split-step schemes resonantly excite high modes on a nonzero background.
pub fn resonance_free_dt(grid: GridSpec, dealias: Dealias) -> f64 {
    let kmax = match dealias {
        Dealias::TwoThirdsRule => grid.dealias_cutoff(),
        _ => grid.n_modes() as i64 / 2,
    } as f64;
    std::f64::consts::PI / (kmax * kmax)
}

/// Step size for landing exactly on `span`: `span / ⌈span / dt⌉`.
pub fn fitted_step(span: f64, dt: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, dt);
    }
    let steps = (span / dt).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservationSample {
    pub step: usize,
    pub t: f64,
    /// `Σ |c_k|²`.
    pub mass: f64,
    /// Hamiltonian, when recorded at this step.
    pub energy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolutionResult {
    pub snapshots: Vec<(f64, FourierField)>,
    pub conservation_log: Vec<ConservationSample>,
    /// `(segment end time, steps, step size)` per segment.
    pub segments: Vec<(f64, usize, f64)>,
}

impl EvolutionResult {
    /// `max_t |mass(t) / mass(0) − 1|`.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.conservation_log.first() else {
            return 0.0;
        };
        if first.mass == 0.0 {
            return 0.0;
        }
        self.conservation_log
            .iter()
            .map(|s| (s.mass / first.mass - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_t |E(t) / E(0) − 1|` over the recorded energies.
    pub fn energy_drift(&self) -> Option<f64> {
        let mut energies = self.conservation_log.iter().filter_map(|s| s.energy);
        let e0 = energies.next()?;
        Some(energies.map(|e| (e / e0 - 1.0).abs()).fold(0.0, f64::max))
    }

    pub fn snapshot(&self, t: f64) -> Option<&FourierField> {
        self.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|(_, f)| f)
    }

    pub fn last(&self) -> Option<&(f64, FourierField)> {
        self.snapshots.last()
    }
}

/// Pointwise flow of `i u_t + |u|² u = 0`: `u ↦ u e^{i|u|² dt}`.
pub fn nonlinear_phase_step(f: &SpatialField, dt: f64) -> SpatialField {
    let mut out = f.clone();
    phase_rotate(out.samples_mut(), dt, 0.0);
    out
}

fn phase_rotate(samples: &mut [Complex64], dt: f64, shift: f64) {
    for s in samples.iter_mut() {
        let phase = (s.norm_sqr() - shift) * dt;
        *s *= Complex64::from_polar(1.0, phase);
    }
}

/// Scratch space for products on the (possibly padded) physical grid.
struct ProductWorkspace {
    grid: GridSpec,
    dealias: Dealias,
    buf: Vec<Complex64>,
}

impl ProductWorkspace {
    fn new(grid: GridSpec, dealias: Dealias) -> Self {
        let len = match dealias {
            Dealias::ZeroPadding2x => 2 * grid.n_modes(),
            _ => grid.n_modes(),
        };
        Self {
            grid,
            dealias,
            buf: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    fn cutoff_mask(&self, coeffs: &mut [Complex64]) {
        if self.dealias == Dealias::TwoThirdsRule {
            let cutoff = self.grid.dealias_cutoff();
            for (i, c) in coeffs.iter_mut().enumerate() {
                if self.grid.mode(i).abs() > cutoff {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Loads `coeffs` into the work buffer and synthesises physical samples.
    fn to_physical(&mut self, coeffs: &[Complex64]) {
        let n = coeffs.len();
        match self.dealias {
            Dealias::ZeroPadding2x => {
                self.buf.fill(Complex64::new(0.0, 0.0));
                let m = self.buf.len();
                self.buf[..n / 2].copy_from_slice(&coeffs[..n / 2]);
                self.buf[m - n / 2..].copy_from_slice(&coeffs[n / 2..]);
            }
            _ => {
                self.buf.copy_from_slice(coeffs);
                let mut tmp = std::mem::take(&mut self.buf);
                self.cutoff_mask(&mut tmp);
                self.buf = tmp;
            }
        }
        synthesize_in_place(&mut self.buf);
    }

    /// Analyses the work buffer and writes the retained modes to `coeffs`.
    fn to_spectral(&mut self, coeffs: &mut [Complex64]) {
        analyze_in_place(&mut self.buf);
        let n = coeffs.len();
        match self.dealias {
            Dealias::ZeroPadding2x => {
                let m = self.buf.len();
                coeffs[..n / 2].copy_from_slice(&self.buf[..n / 2]);
                coeffs[n / 2..].copy_from_slice(&self.buf[m - n / 2..]);
            }
            _ => {
                coeffs.copy_from_slice(&self.buf);
                self.cutoff_mask(coeffs);
            }
        }
    }
}

/// Fourier coefficients of `|u|² u`, computed pseudospectrally with the
/// given dealiasing. With [`Dealias::ZeroPadding2x`] the result equals the
/// truncated convolution `Σ c_{k1} c̄_{k2} c_{k−k1+k2}` up to roundoff.
pub fn cubic_term(u: &FourierField, dealias: Dealias) -> FourierField {
    let mut ws = ProductWorkspace::new(u.grid(), dealias);
    ws.to_physical(u.coeffs());
    for s in ws.buf.iter_mut() {
        *s *= s.norm_sqr();
    }
    let mut out = FourierField::zeros(u.grid());
    ws.to_spectral(out.coeffs_mut());
    out
}

/// The split `|u|²u = P u + ρ(u) + R(u)` of the cubic term's coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonantSplit {
    /// `2 Σ |c_j|²`, i.e. `‖u‖²_{L²} / π`.
    pub p: f64,
    /// `ρ_k = −|c_k|² c_k`.
    pub rho: FourierField,
    /// Everything else: the sum over `k1 ≠ k`, `k2 ≠ k1`.
    pub r: FourierField,
}

impl ResonantSplit {
    /// `P c + ρ + R`.
    pub fn reconstruct(&self, u: &FourierField) -> FourierField {
        FourierField::from_fn(u.grid(), |k| {
            u.coeff(k) * self.p + self.rho.coeff(k) + self.r.coeff(k)
        })
    }
}

/// The conserved coefficient `P = 2 Σ |c_k|²`.
pub fn resonant_coefficient(u: &FourierField) -> f64 {
    2.0 * u.mass()
}

/// Splits the (dealiased, hence exact) cubic convolution into its resonant
/// and nonresonant parts.
pub fn resonant_split(u: &FourierField) -> ResonantSplit {
    let full = cubic_term(u, Dealias::ZeroPadding2x);
    let p = resonant_coefficient(u);
    let rho = FourierField::from_fn(u.grid(), |k| {
        let c = u.coeff(k);
        -c * c.norm_sqr()
    });
    let r = FourierField::from_fn(u.grid(), |k| full.coeff(k) - u.coeff(k) * p - rho.coeff(k));
    ResonantSplit { p, rho, r }
}

/// Discrete Hamiltonian `∫ |u_x|² − |u|⁴/2` over a period. The quartic
/// term is evaluated on a doubled grid, which makes it exact for the
/// truncated series.
pub fn hamiltonian(u: &FourierField) -> f64 {
    let kinetic: f64 = u
        .iter_modes()
        .map(|(k, c)| (k * k) as f64 * c.norm_sqr())
        .sum::<f64>()
        * TAU;
    let mut ws = ProductWorkspace::new(u.grid(), Dealias::ZeroPadding2x);
    ws.to_physical(u.coeffs());
    let mean_quartic: f64 =
        ws.buf.iter().map(|s| s.norm_sqr() * s.norm_sqr()).sum::<f64>() / ws.buf.len() as f64;
    kinetic - 0.5 * TAU * mean_quartic
}

/// Reusable split-step integrator for one grid and dealiasing policy.
pub struct SplitStepper {
    grid: GridSpec,
    workspace: ProductWorkspace,
    gauge_shift: f64,
}

impl SplitStepper {
    pub fn new(grid: GridSpec, dealias: Dealias, gauge_shift: f64) -> Self {
        Self {
            grid,
            workspace: ProductWorkspace::new(grid, dealias),
            gauge_shift,
        }
    }

    fn multipliers(&self, dt: f64) -> Vec<Complex64> {
        let turns = dt / TAU;
        self.grid
            .modes()
            .map(|k| Complex64::from_polar(1.0, -TAU * quadratic_phase_turns(k, turns)))
            .collect()
    }

    fn nonlinear(&mut self, coeffs: &mut [Complex64], dt: f64) {
        self.workspace.to_physical(coeffs);
        phase_rotate(&mut self.workspace.buf, dt, self.gauge_shift);
        self.workspace.to_spectral(coeffs);
    }

    /// Advances `coeffs` by `steps` Strang steps of size `dt`, calling
    /// `after_step(i, coeffs)` after each full step. Stops early (returning
    /// the failed step) if `after_step` returns `false`.
    pub fn advance(
        &mut self,
        coeffs: &mut [Complex64],
        steps: usize,
        dt: f64,
        mut after_step: impl FnMut(usize, &[Complex64]) -> bool,
    ) -> Option<usize> {
        let half = self.multipliers(dt / 2.0);
        let apply = |coeffs: &mut [Complex64]| {
            for (c, m) in coeffs.iter_mut().zip(&half) {
                *c *= m;
            }
        };
        for i in 0..steps {
            apply(coeffs);
            self.nonlinear(coeffs, dt);
            apply(coeffs);
            if !after_step(i, coeffs) {
                return Some(i);
            }
        }
        None
    }
}

/// Evolves `g` to every snapshot time. Each segment between consecutive
/// snapshots is stepped with `span / ⌈span / dt⌉` so snapshots land exactly.
pub fn evolve(g: &FourierField, cfg: &SolverConfig) -> Result<EvolutionResult, SolverError> {
    cfg.validate()?;
    if !g.is_finite() {
        return Err(SolverError::NonFiniteDatum);
    }
    let mut stepper = SplitStepper::new(g.grid(), cfg.dealias, cfg.gauge_shift);
    let mut result = EvolutionResult::default();
    let mut coeffs = g.coeffs().to_vec();
    let mut t = 0.0;
    let mut step_count = 0usize;
    result.conservation_log.push(ConservationSample {
        step: 0,
        t: 0.0,
        mass: g.mass(),
        energy: (cfg.energy_stride > 0).then(|| hamiltonian(g)),
    });

    for &target in &cfg.snapshot_times {
        let (steps, dt) = fitted_step(target - t, cfg.dt);
        let t0 = t;
        let grid = g.grid();
        let stride = cfg.energy_stride;
        let mut log = std::mem::take(&mut result.conservation_log);
        let failed = stepper.advance(&mut coeffs, steps, dt, |i, c| {
            let mass: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            let global = step_count + i + 1;
            let now = if i + 1 == steps { target } else { t0 + (i + 1) as f64 * dt };
            let energy = (stride > 0 && global % stride == 0).then(|| {
                hamiltonian(&FourierField::new(grid, c.to_vec()).expect("grid length"))
            });
            log.push(ConservationSample {
                step: global,
                t: now,
                mass,
                energy,
            });
            mass.is_finite()
        });
        result.conservation_log = log;
        if let Some(i) = failed {
            return Err(SolverError::Blowup {
                step: step_count + i + 1,
                t: t0 + (i + 1) as f64 * dt,
                partial: result,
            });
        }
        step_count += steps;
        t = target;
        result.segments.push((target, steps, dt));
        let field = FourierField::new(g.grid(), coeffs.clone()).expect("grid length");
        if cfg.energy_stride > 0 {
            if let Some(last) = result.conservation_log.last_mut() {
                last.energy.get_or_insert_with(|| hamiltonian(&field));
            }
        }
        result.snapshots.push((target, field));
    }
    Ok(result)
}

/// `N(·, t) = u(t) − e^{iPt} e^{it∂xx} g` with `P = 2 Σ |ĝ_k|²` taken from
/// `g` on its own grid.
pub fn remainder_from(g: &FourierField, u_t: &FourierField, t: f64) -> FourierField {
    let p = resonant_coefficient(g);
    let linear = propagate_turns(g, t / TAU).scaled(Complex64::from_polar(1.0, p * t));
    FourierField::from_fn(g.grid(), |k| u_t.coeff(k) - linear.coeff(k))
}

/// Runs the solver to `t` (which must be one of `cfg.snapshot_times`, or the
/// list must be empty) and returns the nonlinear remainder there.
pub fn nonlinear_remainder(
    g: &FourierField,
    t: f64,
    cfg: &SolverConfig,
) -> Result<FourierField, SolverError> {
    let mut cfg = cfg.clone();
    if cfg.snapshot_times.is_empty() {
        cfg.snapshot_times = vec![t];
    }
    let result = evolve(g, &cfg)?;
    let u_t = result.snapshot(t).ok_or(SolverError::MissingSnapshot(t))?;
    Ok(remainder_from(g, u_t, t))
}

/// Samples of the solution for plotting or graph analysis.
pub fn physical(u: &FourierField) -> SpatialField {
    inverse_transform(u)
}
