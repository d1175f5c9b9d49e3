//! Truncated Fourier representation of 2π-periodic functions.
//!
//! A [`GridSpec`] with `n` modes carries the index set `{-n/2, …, n/2 - 1}`
//! and the sample points `x_j = 2πj/n`. Coefficients are stored in FFT order
//! (non-negative modes first, then negative modes), which keeps transforms
//! allocation-free.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::RationalTime;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("n_modes must be a power of two and at least 8, got {0}")]
    BadGrid(usize),
    #[error("expected {expected} values for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid mismatch: {left} modes vs {right} modes")]
    GridMismatch { left: usize, right: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("L^p index must lie in [1, ∞], got {0}")]
    BadLpIndex(f64),
    #[error("non-finite time {0}")]
    BadTime(f64),
}

/// Uniform discretisation of the torus `R / 2πZ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GridSpec {
    n_modes: usize,
}

impl GridSpec {
    pub fn new(n_modes: usize) -> Result<Self, SpectralError> {
        if n_modes < 8 || !n_modes.is_power_of_two() {
            return Err(SpectralError::BadGrid(n_modes));
        }
        Ok(Self { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Sample spacing `2π / n`.
    pub fn spacing(&self) -> f64 {
        TAU / self.n_modes as f64
    }

    pub fn min_mode(&self) -> i64 {
        -(self.n_modes as i64 / 2)
    }

    pub fn max_mode(&self) -> i64 {
        self.n_modes as i64 / 2 - 1
    }

    /// Largest retained `|k|` under the two-thirds rule. Also used as the
    /// upper edge of fitting windows so that they stay clear of the grid edge.
    pub fn dealias_cutoff(&self) -> i64 {
        self.n_modes as i64 / 3
    }

    /// Mode number stored at FFT-order position `index`.
    #[inline]
    pub fn mode(&self, index: usize) -> i64 {
        let n = self.n_modes;
        if index < n / 2 {
            index as i64
        } else {
            index as i64 - n as i64
        }
    }

    /// FFT-order position of mode `k`, if it is on the grid.
    #[inline]
    pub fn index(&self, k: i64) -> Option<usize> {
        if k < self.min_mode() || k > self.max_mode() {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n_modes as i64) as usize)
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.n_modes).map(move |i| self.mode(i))
    }

    pub fn x(&self, j: usize) -> f64 {
        self.spacing() * j as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_modes).map(|j| self.x(j)).collect()
    }

    /// Grid with twice as many modes.
    pub fn refined(&self) -> Self {
        Self {
            n_modes: self.n_modes * 2,
        }
    }
}

impl TryFrom<usize> for GridSpec {
    type Error = SpectralError;

    fn try_from(n: usize) -> Result<Self, SpectralError> {
        GridSpec::new(n)
    }
}

impl From<GridSpec> for usize {
    fn from(g: GridSpec) -> usize {
        g.n_modes
    }
}

/// Fourier coefficients `c_k` of `u(x) = Σ_k c_k e^{ikx}` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl FourierField {
    /// Wraps coefficients given in FFT order.
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.n_modes() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n_modes(),
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_modes()],
        }
    }

    /// Builds a field from a function of the mode number.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(i64) -> Complex64) -> Self {
        let coeffs = grid.modes().map(&mut f).collect();
        Self { grid, coeffs }
    }

    /// `amplitude · e^{ikx}`. Panics if `k` is off the grid.
    pub fn single_mode(grid: GridSpec, k: i64, amplitude: Complex64) -> Self {
        let mut f = Self::zeros(grid);
        f.set(k, amplitude);
        f
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Coefficients in FFT order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// `c_k`, or zero when `k` is off the grid.
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.grid
            .index(k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Sets `c_k`. Panics if `k` is off the grid.
    pub fn set(&mut self, k: i64, value: Complex64) {
        let i = self
            .grid
            .index(k)
            .unwrap_or_else(|| panic!("mode {k} is off a {}-mode grid", self.grid.n_modes()));
        self.coeffs[i] = value;
    }

    /// `(k, c_k)` pairs in storage order.
    pub fn iter_modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.grid.mode(i), c))
    }

    /// Mode numbers ordered from `-n/2` to `n/2 - 1`.
    pub fn sorted_modes(&self) -> Vec<(i64, Complex64)> {
        (self.grid.min_mode()..=self.grid.max_mode())
            .map(|k| (k, self.coeff(k)))
            .collect()
    }

    /// `Σ |c_k|²`, i.e. the mean of `|u|²` over a period.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `‖u‖_{L²(0,2π)} = sqrt(2π Σ |c_k|²)`.
    pub fn l2_norm(&self) -> f64 {
        (TAU * self.mass()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|&c| c * factor).collect(),
        }
    }

    fn check_grid(&self, other: &Self) -> Result<(), SpectralError> {
        if self.grid != other.grid {
            return Err(SpectralError::GridMismatch {
                left: self.grid.n_modes(),
                right: other.grid.n_modes(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, SpectralError> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, SpectralError> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Relative L² distance `‖self − other‖ / ‖other‖`.
    pub fn relative_l2_distance(&self, other: &Self) -> Result<f64, SpectralError> {
        let diff = self.try_sub(other)?;
        Ok((diff.mass() / other.mass()).sqrt())
    }

    /// Largest coefficient-wise discrepancy.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, SpectralError> {
        self.check_grid(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Zero-pads or truncates onto another grid. Truncation keeps exactly the
    /// modes representable on the target grid.
    pub fn resampled(&self, grid: GridSpec) -> Self {
        let mut out = Self::zeros(grid);
        let lo = grid.min_mode().max(self.grid.min_mode());
        let hi = grid.max_mode().min(self.grid.max_mode());
        for k in lo..=hi {
            out.set(k, self.coeff(k));
        }
        out
    }

    /// Translation `u(x) ↦ u(x − shift)`: `c_k ↦ e^{-ik·shift} c_k`.
    pub fn translated(&self, shift: f64) -> Self {
        Self::from_fn(self.grid, |k| {
            self.coeff(k) * Complex64::from_polar(1.0, -(k as f64) * shift)
        })
    }
}

/// Samples `u(x_j)` at `x_j = 2πj/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    grid: GridSpec,
    samples: Vec<Complex64>,
}

impl SpatialField {
    pub fn new(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self, SpectralError> {
        if samples.len() != grid.n_modes() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n_modes(),
                got: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let samples = (0..grid.n_modes()).map(|j| f(grid.x(j))).collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.re).collect()
    }

    pub fn imag_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.im).collect()
    }

    /// Riemann-sum `L^p` norm with weight `2π/n`; `p = ∞` gives the sample
    /// maximum.
    pub fn lp_norm(&self, p: f64) -> Result<f64, SpectralError> {
        lp_norm(&self.samples, p)
    }
}

fn lp_norm(samples: &[Complex64], p: f64) -> Result<f64, SpectralError> {
    if p.is_nan() || p < 1.0 {
        return Err(SpectralError::BadLpIndex(p));
    }
    if p.is_infinite() {
        return Ok(samples.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    let w = TAU / samples.len() as f64;
    let sum: f64 = if p == 2.0 {
        samples.iter().map(|c| c.norm_sqr()).sum()
    } else {
        samples.iter().map(|c| c.norm().powf(p)).sum()
    };
    Ok((w * sum).powf(1.0 / p))
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Cached FFT plan for this thread.
pub(crate) fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        let key = (len, direction == FftDirection::Forward);
        cache
            .entry(key)
            .or_insert_with(|| planner.plan_fft(len, direction))
            .clone()
    })
}

/// In-place unnormalised inverse DFT: `buf_j ← Σ_i buf_i e^{+2πi ij/n}`.
pub(crate) fn synthesize_in_place(buf: &mut [Complex64]) {
    plan(buf.len(), FftDirection::Inverse).process(buf);
}

/// In-place analysis: `buf_i ← (1/n) Σ_j buf_j e^{-2πi ij/n}`.
pub(crate) fn analyze_in_place(buf: &mut [Complex64]) {
    plan(buf.len(), FftDirection::Forward).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
}

/// Samples → coefficients, `c_k = (1/n) Σ_j f(x_j) e^{-ikx_j}`.
pub fn forward_transform(f: &SpatialField) -> Result<FourierField, SpectralError> {
    if let Some(index) = f
        .samples
        .iter()
        .position(|c| !(c.re.is_finite() && c.im.is_finite()))
    {
        return Err(SpectralError::NonFinite { index });
    }
    let mut coeffs = f.samples.clone();
    analyze_in_place(&mut coeffs);
    Ok(FourierField {
        grid: f.grid,
        coeffs,
    })
}

/// Coefficients → samples, `u(x_j) = Σ_k c_k e^{ikx_j}`.
pub fn inverse_transform(u: &FourierField) -> SpatialField {
    let mut samples = u.coeffs.clone();
    synthesize_in_place(&mut samples);
    SpatialField {
        grid: u.grid,
        samples,
    }
}

/// Fractional part of `k² · turns`, with the product formed exactly via FMA
/// so that only the rounding of `turns` itself enters the phase.
#[inline]
pub(crate) fn quadratic_phase_turns(k: i64, turns: f64) -> f64 {
    let k2 = (k * k) as f64;
    let hi = k2 * turns;
    let lo = k2.mul_add(turns, -hi);
    let f = (hi - hi.floor()) + lo;
    f - f.floor()
}

/// Free propagator `e^{it∂xx}`: `c_k ↦ e^{-ik²t} c_k`.
pub fn linear_propagate(u: &FourierField, t: f64) -> Result<FourierField, SpectralError> {
    if !t.is_finite() {
        return Err(SpectralError::BadTime(t));
    }
    Ok(propagate_turns(u, t / TAU))
}

/// Free propagator for `t = 2π · turns`. Only the fractional part of `turns`
/// matters, so `turns` and `turns + 1` give identical multipliers.
pub fn propagate_turns(u: &FourierField, turns: f64) -> FourierField {
    let turns = turns - turns.floor();
    FourierField::from_fn(u.grid, |k| {
        let phase = -TAU * quadratic_phase_turns(k, turns);
        u.coeff(k) * Complex64::from_polar(1.0, phase)
    })
}

/// Free propagator at a rational time, with phases `-2π (p k² mod q)/q`
/// computed in integer arithmetic.
pub fn propagate_rational(u: &FourierField, rt: RationalTime) -> FourierField {
    let q = rt.q() as i128;
    let p = rt.p() as i128;
    FourierField::from_fn(u.grid, |k| {
        let k = k as i128;
        let r = (p * k * k).rem_euclid(q);
        let phase = -TAU * (r as f64) / (q as f64);
        u.coeff(k as i64) * Complex64::from_polar(1.0, phase)
    })
}

/// `‖u‖_{H^s} = sqrt(Σ ⟨k⟩^{2s} |c_k|²)` with `⟨k⟩ = (1 + k²)^{1/2}`.
pub fn sobolev_norm(u: &FourierField, s: f64) -> f64 {
    u.iter_modes()
        .map(|(k, c)| (1.0 + (k * k) as f64).powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Whether dyadic block `j` keeps mode `k`: `|k| ≤ 1` for `j = 0`, else
/// `2^{j-1} < |k| ≤ 2^j`.
#[inline]
pub fn in_dyadic_block(k: i64, j: u32) -> bool {
    let a = k.unsigned_abs();
    if j == 0 {
        a <= 1
    } else {
        a > 1u64 << (j - 1) && a <= 1u64 << j
    }
}

/// Index of the largest non-empty dyadic block on `grid`.
pub fn max_dyadic_block(grid: GridSpec) -> u32 {
    (grid.n_modes() / 2).trailing_zeros()
}

/// One Littlewood–Paley piece.
#[derive(Clone, Debug)]
pub struct LpBlock {
    pub j: u32,
    pub field: FourierField,
    /// Set when no mode of the block lies on the grid; `field` is then zero.
    pub outside_grid: bool,
}

/// Sharp dyadic Littlewood–Paley projection `P_j`.
pub fn littlewood_paley_block(u: &FourierField, j: u32) -> LpBlock {
    let outside_grid = j > max_dyadic_block(u.grid);
    let field = FourierField::from_fn(u.grid, |k| {
        if in_dyadic_block(k, j) {
            u.coeff(k)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    LpBlock {
        j,
        field,
        outside_grid,
    }
}

/// `‖P_j u‖_{L^p}` for every block on the grid.
pub fn block_lp_norms(u: &FourierField, p: f64) -> Result<Vec<(u32, f64)>, SpectralError> {
    (0..=max_dyadic_block(u.grid))
        .map(|j| {
            let block = littlewood_paley_block(u, j);
            let norm = inverse_transform(&block.field).lp_norm(p)?;
            Ok((j, norm))
        })
        .collect()
}

/// `sup_j 2^{sj} ‖P_j u‖_{L^p}` over the blocks representable on the grid.
pub fn besov_seminorm(u: &FourierField, s: f64, p: f64) -> Result<f64, SpectralError> {
    Ok(block_lp_norms(u, p)?
        .into_iter()
        .map(|(j, norm)| (s * j as f64).exp2() * norm)
        .fold(0.0, f64::max))
}
