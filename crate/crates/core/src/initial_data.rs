//! Piecewise-constant (bounded-variation) initial data with exact Fourier
//! coefficients, and a decay-rate certificate for the resulting series.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::line_fit;
use crate::spectral::{FourierField, GridSpec};

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("step data needs at least one breakpoint")]
    NoBreakpoints,
    #[error("{breakpoints} breakpoints but {values} plateau values")]
    CountMismatch { breakpoints: usize, values: usize },
    #[error("breakpoint {index} ({value}) is outside [0, 2π)")]
    OutOfRange { index: usize, value: f64 },
    #[error("breakpoints {index} and {next} give an empty interval")]
    DegenerateInterval { index: usize, next: usize },
    #[error("plateau value {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("decay fit unreliable: {nonzero} nonzero modes in window [{lo}, {hi}], need {needed}")]
    InsufficientTail {
        nonzero: usize,
        needed: usize,
        lo: i64,
        hi: i64,
    },
}

/// A step function on the torus. Plateau `i` covers
/// `[breakpoints[i], breakpoints[i + 1])`; the last plateau wraps around to
/// `breakpoints[0] + 2π`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDataSpec {
    breakpoints: Vec<f64>,
    values: Vec<Complex64>,
}

impl StepDataSpec {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Complex64>) -> Result<Self, DataError> {
        if breakpoints.is_empty() {
            return Err(DataError::NoBreakpoints);
        }
        if breakpoints.len() != values.len() {
            return Err(DataError::CountMismatch {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        for (index, &b) in breakpoints.iter().enumerate() {
            if !(0.0..TAU).contains(&b) {
                return Err(DataError::OutOfRange { index, value: b });
            }
        }
        for index in 0..breakpoints.len().saturating_sub(1) {
            if breakpoints[index + 1] <= breakpoints[index] {
                return Err(DataError::DegenerateInterval {
                    index,
                    next: index + 1,
                });
            }
        }
        if let Some(index) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(DataError::NonFiniteValue { index });
        }
        Ok(Self { breakpoints, values })
    }

    /// Real-valued convenience constructor.
    pub fn real(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, DataError> {
        Self::new(
            breakpoints,
            values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )
    }

    /// Indicator of `[0, π)`, the canonical test datum.
    pub fn half_indicator() -> Self {
        Self::real(vec![0.0, PI], vec![1.0, 0.0]).expect("valid spec")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `(left, right, value)` for each plateau, with the wrap-around piece
    /// ending at `breakpoints[0] + 2π`.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, Complex64)> + '_ {
        let m = self.breakpoints.len();
        (0..m).map(move |i| {
            let left = self.breakpoints[i];
            let right = if i + 1 < m {
                self.breakpoints[i + 1]
            } else {
                self.breakpoints[0] + TAU
            };
            (left, right, self.values[i])
        })
    }

    /// Sum of jump magnitudes across all breakpoints (cyclically).
    pub fn total_variation(&self) -> f64 {
        let m = self.values.len();
        (0..m)
            .map(|i| (self.values[i] - self.values[(i + m - 1) % m]).norm())
            .sum()
    }

    /// Largest single jump.
    pub fn max_jump(&self) -> f64 {
        let m = self.values.len();
        (0..m)
            .map(|i| (self.values[i] - self.values[(i + m - 1) % m]).norm())
            .fold(0.0, f64::max)
    }

    /// Pointwise value, right-continuous at the breakpoints.
    pub fn evaluate(&self, x: f64) -> Complex64 {
        let x = x.rem_euclid(TAU);
        let m = self.breakpoints.len();
        match self.breakpoints.iter().rposition(|&b| b <= x) {
            Some(i) => self.values[i],
            None => self.values[m - 1],
        }
    }

    /// Every plateau value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Exact Fourier coefficients of the step function, truncated to the grid:
/// `c_0` is the mean and, for `k ≠ 0`,
/// `c_k = (1/(2πik)) Σ value · (e^{-ik·left} − e^{-ik·right})`.
pub fn synthesize_step(spec: &StepDataSpec, grid: GridSpec) -> FourierField {
    FourierField::from_fn(grid, |k| {
        if k == 0 {
            spec.pieces()
                .map(|(l, r, v)| v * (r - l))
                .sum::<Complex64>()
                / TAU
        } else {
            let kf = k as f64;
            let sum: Complex64 = spec
                .pieces()
                .map(|(l, r, v)| {
                    v * (Complex64::from_polar(1.0, -kf * l) - Complex64::from_polar(1.0, -kf * r))
                })
                .sum();
            sum / Complex64::new(0.0, TAU * kf)
        }
    })
}

/// Outcome of a coefficient decay fit `|c_k| ~ |k|^{-σ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Decay {
    Power { sigma: f64, r_squared: f64 },
    /// Every coefficient in the window is numerically zero.
    Superpolynomial,
}

impl Decay {
    /// `σ`, or `+∞` for superpolynomial decay.
    pub fn exponent(&self) -> f64 {
        match self {
            Decay::Power { sigma, .. } => *sigma,
            Decay::Superpolynomial => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub decay: Decay,
    /// Inclusive `|k|` window used in the regression.
    pub window: (i64, i64),
    /// Number of nonzero coefficients entering the fit.
    pub points: usize,
}

impl DecayReport {
    /// Critical Sobolev index `s* = σ − 1/2`: the series is in `H^s` for
    /// every `s < s*`.
    pub fn critical_sobolev(&self) -> f64 {
        self.decay.exponent() - 0.5
    }
}

/// Minimum number of nonzero coefficients for a trustworthy decay fit.
pub const MIN_TAIL_POINTS: usize = 64;

/// Coefficients below this fraction of the largest one count as zero.
const ZERO_THRESHOLD: f64 = 1e-13;

/// Fits `log|c_k|` against `log|k|` over `lo ≤ |k| ≤ hi`, skipping
/// numerically zero coefficients.
pub fn fit_decay(u: &FourierField, lo: i64, hi: i64) -> Result<DecayReport, DataError> {
    let peak = u.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let floor = ZERO_THRESHOLD * peak;
    let (xs, ys): (Vec<f64>, Vec<f64>) = u
        .iter_modes()
        .filter(|(k, c)| (lo..=hi).contains(&k.abs()) && c.norm() > floor)
        .map(|(k, c)| ((k.abs() as f64).ln(), c.norm().ln()))
        .unzip();
    if xs.is_empty() {
        return Ok(DecayReport {
            decay: Decay::Superpolynomial,
            window: (lo, hi),
            points: 0,
        });
    }
    if xs.len() < MIN_TAIL_POINTS {
        return Err(DataError::InsufficientTail {
            nonzero: xs.len(),
            needed: MIN_TAIL_POINTS,
            lo,
            hi,
        });
    }
    let fit = line_fit(&xs, &ys).ok_or(DataError::InsufficientTail {
        nonzero: xs.len(),
        needed: MIN_TAIL_POINTS,
        lo,
        hi,
    })?;
    Ok(DecayReport {
        decay: Decay::Power {
            sigma: -fit.slope,
            r_squared: fit.r_squared,
        },
        window: (lo, hi),
        points: xs.len(),
    })
}

/// The default fitting window: the top two octaves below the two-thirds
/// cutoff, `K/4 < |k| ≤ K`.
pub fn tail_window(grid: GridSpec) -> (i64, i64) {
    let cutoff = grid.dealias_cutoff();
    (cutoff / 4 + 1, cutoff)
}

/// Fits the coefficient decay exponent over [`tail_window`] and reports the
/// implied critical Sobolev index.
pub fn certify_sobolev_class(u: &FourierField) -> Result<DecayReport, DataError> {
    let (lo, hi) = tail_window(u.grid());
    fit_decay(u, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::forward_transform;
    use crate::spectral::SpatialField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    /// Composite Gauss–Legendre (5-point) quadrature of
    /// `(1/2π) ∫ g(x) e^{-ikx} dx`, panel by panel inside each plateau so
    /// that the integrand is smooth on every panel.
    fn quadrature_coeff(spec: &StepDataSpec, k: i64) -> Complex64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let mut total = Complex64::new(0.0, 0.0);
        for (l, r, _) in spec.pieces() {
            let panels = 64 + 4 * k.unsigned_abs() as usize;
            let h = (r - l) / panels as f64;
            for p in 0..panels {
                let a = l + p as f64 * h;
                let mid = a + h / 2.0;
                for (node, w) in NODES.iter().zip(WEIGHTS) {
                    let x = mid + node * h / 2.0;
                    // Evaluate at the plateau value directly: x is interior.
                    let value = spec.evaluate(x);
                    total += value * Complex64::from_polar(1.0, -(k as f64) * x) * (w * h / 2.0);
                }
            }
        }
        total / TAU
    }

    #[test]
    fn validation() {
        assert_eq!(StepDataSpec::real(vec![], vec![]), Err(DataError::NoBreakpoints));
        assert!(matches!(
            StepDataSpec::real(vec![0.0, 1.0], vec![1.0]),
            Err(DataError::CountMismatch { .. })
        ));
        assert!(matches!(
            StepDataSpec::real(vec![1.0, 1.0], vec![1.0, 2.0]),
            Err(DataError::DegenerateInterval { index: 0, next: 1 })
        ));
        assert!(matches!(
            StepDataSpec::real(vec![0.0, 7.0], vec![1.0, 2.0]),
            Err(DataError::OutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            StepDataSpec::real(vec![0.0], vec![f64::NAN]),
            Err(DataError::NonFiniteValue { index: 0 })
        ));
    }

    #[test]
    fn single_plateau_is_constant() {
        let spec = StepDataSpec::real(vec![0.7], vec![1.0]).unwrap();
        let u = synthesize_step(&spec, grid(64));
        assert!((u.coeff(0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(u.iter_modes().filter(|(k, _)| *k != 0).all(|(_, c)| c.norm() < 1e-15));
        assert_eq!(spec.total_variation(), 0.0);
    }

    #[test]
    fn half_indicator_closed_form() {
        let spec = StepDataSpec::half_indicator();
        let u = synthesize_step(&spec, grid(64));
        assert!((u.coeff(0).re - 0.5).abs() < 1e-15);
        for k in -32i64..32 {
            if k == 0 {
                continue;
            }
            let expected = if k % 2 != 0 {
                Complex64::new(0.0, -1.0 / (PI * k as f64))
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((u.coeff(k) - expected).norm() < 1e-15, "mode {k}");
            assert!((u.coeff(k) - quadrature_coeff(&spec, k)).norm() < 1e-10, "mode {k}");
        }
        assert_eq!(spec.total_variation(), 2.0);
    }

    #[test]
    fn three_step_matches_quadrature() {
        let spec = StepDataSpec::new(
            vec![0.3, 2.0, 4.5],
            vec![
                Complex64::new(1.0, 0.5),
                Complex64::new(-0.25, 0.0),
                Complex64::new(0.0, 2.0),
            ],
        )
        .unwrap();
        let u = synthesize_step(&spec, grid(64));
        for k in -32i64..32 {
            assert!((u.coeff(k) - quadrature_coeff(&spec, k)).norm() < 1e-10, "mode {k}");
        }
    }

    #[test]
    fn random_specs_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5 {
            let m = rng.gen_range(1..=8);
            let mut bps: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..TAU)).collect();
            bps.sort_by(f64::total_cmp);
            let vals = (0..m)
                .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let spec = StepDataSpec::new(bps, vals).unwrap();
            let u = synthesize_step(&spec, grid(32));
            for k in -16i64..16 {
                assert!((u.coeff(k) - quadrature_coeff(&spec, k)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn scaling_is_exact() {
        let spec = StepDataSpec::half_indicator();
        let u = synthesize_step(&spec, grid(128));
        let v = synthesize_step(&spec.scaled(3.0), grid(128));
        assert!(u.scaled(Complex64::new(3.0, 0.0)).max_abs_diff(&v).unwrap() < 1e-15);
    }

    #[test]
    fn evaluate_wraps() {
        let spec = StepDataSpec::real(vec![1.0, 4.0], vec![2.0, 5.0]).unwrap();
        assert_eq!(spec.evaluate(0.5).re, 5.0);
        assert_eq!(spec.evaluate(1.0).re, 2.0);
        assert_eq!(spec.evaluate(4.5).re, 5.0);
        assert_eq!(spec.evaluate(TAU + 2.0).re, 2.0);
    }

    #[test]
    fn jump_data_is_not_band_limited() {
        let spec = StepDataSpec::new(
            vec![0.3, 2.0, 4.5],
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(-0.5, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        )
        .unwrap();
        let g = grid(1024);
        let u = synthesize_step(&spec, g);
        let top = (256i64..512)
            .flat_map(|k| [k, -k])
            .filter_map(|k| g.index(k).map(|_| (k as f64).abs() * u.coeff(k).norm()))
            .fold(0.0, f64::max);
        assert!(top > 0.01 * spec.total_variation());
    }

    #[test]
    fn certify_half_indicator() {
        let u = synthesize_step(&StepDataSpec::half_indicator(), grid(4096));
        let report = certify_sobolev_class(&u).unwrap();
        assert!((report.decay.exponent() - 1.0).abs() < 1e-3, "{report:?}");
        assert!((report.critical_sobolev() - 0.5).abs() < 1e-3);
        // Even modes are exactly zero in exact arithmetic and must be skipped.
        let (lo, hi) = report.window;
        let odd = (lo..=hi).filter(|k| k % 2 != 0).count();
        assert_eq!(report.points, 2 * odd);
    }

    #[test]
    fn band_limited_is_superpolynomial() {
        let mut u = FourierField::zeros(grid(512));
        for k in -3..=3 {
            u.set(k, Complex64::new(1.0, k as f64));
        }
        let report = certify_sobolev_class(&u).unwrap();
        assert_eq!(report.decay, Decay::Superpolynomial);
        assert_eq!(report.decay.exponent(), f64::INFINITY);
    }

    #[test]
    fn smooth_datum_decays_fast() {
        let g = grid(256);
        let f = SpatialField::from_fn(g, |x| Complex64::new(x.cos().exp(), 0.0));
        let u = forward_transform(&f).unwrap();
        let report = certify_sobolev_class(&u).unwrap();
        assert!(report.decay.exponent() > 4.0, "{report:?}");
    }

    #[test]
    fn thin_tail_is_rejected() {
        let g = grid(256);
        let mut u = FourierField::zeros(g);
        u.set(0, Complex64::new(1.0, 0.0));
        for k in 30..40 {
            u.set(k, Complex64::new(1.0 / k as f64, 0.0));
        }
        assert!(matches!(
            certify_sobolev_class(&u),
            Err(DataError::InsufficientTail { nonzero: 10, .. })
        ));
    }
}
