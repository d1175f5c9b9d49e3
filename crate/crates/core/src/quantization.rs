//! Rational-time quantization: at `t = 2πp/q` the free evolution is a finite
//! combination of translates of the datum by multiples of `2π/q`, weighted by
//! normalised Gauss sums.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::FourierField;
pub use crate::time::RationalTime;

/// `a_m`, `m = 0..q`, such that `e^{it∂xx} g = Σ_m a_m g(· − 2πm/q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslateCombination {
    pub time: RationalTime,
    pub coefficients: Vec<Complex64>,
}

impl TranslateCombination {
    pub fn q(&self) -> u64 {
        self.time.q()
    }

    /// `Σ_m a_m e^{-2πikm/q}`, the Fourier multiplier of the combination.
    pub fn multiplier(&self, k: i64) -> Complex64 {
        let q = self.q() as i128;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, a)| a * unit_root(-(k as i128) * m as i128, q))
            .sum()
    }

    /// `Σ_m |a_m|²`; equals 1 because the multiplier is unimodular.
    pub fn energy(&self) -> f64 {
        self.coefficients.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rows `(q, p, m, Re a_m, Im a_m)`.
    pub fn rows(&self) -> impl Iterator<Item = (u64, i64, usize, f64, f64)> + '_ {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, a)| (self.time.q(), self.time.p(), m, a.re, a.im))
    }
}

/// `e^{2πi r/q}` with the residue reduced exactly before conversion.
fn unit_root(r: i128, q: i128) -> Complex64 {
    let r = r.rem_euclid(q);
    Complex64::from_polar(1.0, TAU * r as f64 / q as f64)
}

/// `G(p, q, m) = Σ_{l<q} e^{2πi(−p l² + m l)/q}`, summed with each exponent
/// reduced mod `q` in integer arithmetic.
pub fn gauss_sum(p: i64, q: u64, m: i64) -> Complex64 {
    let (p, q, m) = (p as i128, q as i128, m as i128);
    (0..q).map(|l| unit_root(-p * l * l + m * l, q)).sum()
}

/// `a_m = G(p, q, m) / q`.
pub fn quantization_coefficients(rt: RationalTime) -> TranslateCombination {
    let q = rt.q();
    let coefficients = (0..q as i64)
        .map(|m| gauss_sum(rt.p(), q, m) / q as f64)
        .collect();
    TranslateCombination {
        time: rt,
        coefficients,
    }
}

/// `Σ_m a_m g(· − 2πm/q)`, assembled from translates of `g`.
pub fn quantized_evolution(g: &FourierField, rt: RationalTime) -> FourierField {
    let combo = quantization_coefficients(rt);
    let q = combo.q() as i128;
    let mut out = FourierField::zeros(g.grid());
    for (m, a) in combo.coefficients.iter().enumerate() {
        if a.norm() == 0.0 {
            continue;
        }
        for (i, (k, c)) in g.iter_modes().enumerate() {
            out.coeffs_mut()[i] += a * c * unit_root(-(k as i128) * m as i128, q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::{synthesize_step, StepDataSpec};
    use crate::spectral::{propagate_rational, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rt(p: i64, q: i64) -> RationalTime {
        RationalTime::new(p, q).unwrap()
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn gauss_sum_examples() {
        for m in -3..4 {
            assert!((gauss_sum(5, 1, m) - c(1.0, 0.0)).norm() < 1e-15);
        }
        assert!(gauss_sum(1, 2, 0).norm() < 1e-15);
        assert!((gauss_sum(1, 2, 1) - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coefficient_examples() {
        let half = quantization_coefficients(rt(1, 2));
        assert!(half.coefficients[0].norm() < 1e-15);
        assert!((half.coefficients[1] - c(1.0, 0.0)).norm() < 1e-15);
        for k in 0..8i64 {
            let expected = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((half.multiplier(k) - c(expected, 0.0)).norm() < 1e-14);
        }
        let zero = quantization_coefficients(RationalTime::zero());
        assert_eq!(zero.coefficients, vec![c(1.0, 0.0)]);
    }

    #[test]
    fn quarter_matches_four_point_inverse_dft() {
        let combo = quantization_coefficients(rt(1, 4));
        let mult: Vec<Complex64> = (0..4)
            .map(|k: i64| Complex64::from_polar(1.0, -TAU * (k * k) as f64 / 4.0))
            .collect();
        for m in 0..4 {
            let a: Complex64 = (0..4)
                .map(|k| mult[k] * Complex64::from_polar(1.0, TAU * (k * m) as f64 / 4.0))
                .sum::<Complex64>()
                / 4.0;
            assert!((combo.coefficients[m] - a).norm() < 1e-15, "m = {m}");
        }
    }

    #[test]
    fn multiplier_identity_up_to_64() {
        for q in 1..=64u64 {
            for p in 0..q as i64 {
                if gcd(p as u64, q) != 1 {
                    continue;
                }
                let combo = quantization_coefficients(rt(p, q as i64));
                assert!((combo.energy() - 1.0).abs() < 1e-12);
                for k in 0..q as i64 {
                    let target = unit_root(-(p as i128) * (k * k) as i128, q as i128);
                    let err = (combo.multiplier(k) - target).norm();
                    assert!(err < 1e-12, "p/q = {p}/{q}, k = {k}: {err}");
                }
            }
        }
    }

    #[test]
    fn mirrored_sign_is_wrong() {
        // The opposite quadratic sign belongs to the propagator e^{+ik²t}; it
        // agrees with ours only when q ≤ 2.
        let g = FourierField::from_fn(GridSpec::new(64).unwrap(), |k| c(1.0 / (1 + k.abs()) as f64, 0.0));
        let t = rt(1, 3);
        let mirrored: Vec<Complex64> = (0..3).map(|m| gauss_sum(-1, 3, m) / 3.0).collect();
        let mut out = FourierField::zeros(g.grid());
        for (m, a) in mirrored.iter().enumerate() {
            for (i, (k, ck)) in g.iter_modes().enumerate() {
                out.coeffs_mut()[i] += a * ck * unit_root(-(k as i128) * m as i128, 3);
            }
        }
        let exact = propagate_rational(&g, t);
        assert!(out.relative_l2_distance(&exact).unwrap() > 0.1);
        assert!(quantized_evolution(&g, t).relative_l2_distance(&exact).unwrap() < 1e-12);
    }

    #[test]
    fn step_datum_at_half_period_is_a_translate() {
        let g = synthesize_step(&StepDataSpec::half_indicator(), GridSpec::new(1024).unwrap());
        let q = quantized_evolution(&g, rt(1, 2));
        let exact = propagate_rational(&g, rt(1, 2));
        assert!(q.max_abs_diff(&exact).unwrap() < 1e-12);
        assert!(q.max_abs_diff(&g.translated(std::f64::consts::PI)).unwrap() < 1e-12);
    }

    #[test]
    fn random_band_limited_at_three_sevenths() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = FourierField::from_fn(GridSpec::new(256).unwrap(), |k| {
            if k.abs() < 60 {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                c(0.0, 0.0)
            }
        });
        let t = rt(3, 7);
        let q = quantized_evolution(&g, t);
        assert!(q.relative_l2_distance(&propagate_rational(&g, t)).unwrap() < 1e-10);
        assert!((q.l2_norm() / g.l2_norm() - 1.0).abs() < 1e-12);
        assert_eq!(quantized_evolution(&g, RationalTime::zero()), g);
    }

    #[test]
    fn rows_cover_every_translate() {
        let combo = quantization_coefficients(rt(2, 5));
        let rows: Vec<_> = combo.rows().collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().enumerate().all(|(i, r)| r.0 == 5 && r.1 == 2 && r.2 == i));
    }
}
