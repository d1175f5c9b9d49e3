//! Numerical checks of the lattice-sum lemma and the first Picard iterate of
//! the cubic equation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::line_fit;
use crate::spectral::{quadratic_phase_turns, FourierField, GridSpec};

#[derive(Debug, Error, PartialEq)]
pub enum ScanError {
    #[error("need β ≥ γ ≥ 0 and β + γ > 1, got β = {beta}, γ = {gamma}")]
    Hypotheses { beta: f64, gamma: f64 },
    #[error("β must be finite and nonnegative, got {0}")]
    BadBeta(f64),
    #[error("k range must be positive")]
    EmptyRange,
    #[error("Picard sums are limited to {max} modes, got {got}")]
    GridTooLarge { got: usize, max: usize },
    #[error("need 1 ≤ k_lo < k_hi, got [{0}, {1}]")]
    BadWindow(i64, i64),
}

/// Japanese bracket `⟨x⟩ = (1 + x²)^{1/2}`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `Σ_{1 ≤ |n| ≤ |k|} |n|^{-β}`, with the value 1 at `k = 0`.
pub fn phi_beta(k: i64, beta: f64) -> Result<f64, ScanError> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(ScanError::BadBeta(beta));
    }
    let k = k.unsigned_abs();
    if k == 0 {
        return Ok(1.0);
    }
    // Smallest terms first.
    Ok(2.0 * (1..=k).rev().map(|n| (n as f64).powf(-beta)).sum::<f64>())
}

/// Growth exponent `e` in `φ_β(k) ~ k^e` over `[k_lo, k_hi]`, read off the
/// dyadic increments `φ_β(2k) − φ_β(k) ~ k^{1−β}` and floored at zero
/// (bounded growth).
pub fn phi_growth_exponent(beta: f64, k_lo: i64, k_hi: i64) -> Result<f64, ScanError> {
    if !(1 <= k_lo && k_lo < k_hi) {
        return Err(ScanError::BadWindow(k_lo, k_hi));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut k = k_lo;
    while 2 * k <= k_hi {
        let inc = phi_beta(2 * k, beta)? - phi_beta(k, beta)?;
        xs.push((k as f64).ln());
        ys.push(inc.ln());
        k *= 2;
    }
    if xs.len() < 2 {
        return Err(ScanError::BadWindow(k_lo, k_hi));
    }
    let fit = line_fit(&xs, &ys).expect("distinct dyadic points");
    Ok(fit.slope.max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaScanResult {
    pub beta: f64,
    pub gamma: f64,
    pub k_range: i64,
    /// `sup` of the truncated left side over the right side.
    pub sup_ratio: f64,
    pub argmax: (i64, i64),
    /// Bound on the omitted part `|n| > 8 k_range` of any left side.
    pub tail_bound: f64,
    /// `tail_bound` divided by the smallest right side in the scan, i.e. a
    /// bound on how much truncation can lower any ratio.
    pub ratio_tail_bound: f64,
}

/// Scans `Σ_n ⟨n−k₁⟩^{-β}⟨n−k₂⟩^{-γ} / (⟨k₁−k₂⟩^{-γ} φ_β(k₁−k₂))` over
/// `|k₁|, |k₂| ≤ k_range`, truncating the sum to `|n| ≤ 8 k_range`.
pub fn lemma1_ratio_scan(beta: f64, gamma: f64, k_range: i64) -> Result<LemmaScanResult, ScanError> {
    if !(beta.is_finite() && gamma.is_finite() && beta >= gamma && gamma >= 0.0 && beta + gamma > 1.0) {
        return Err(ScanError::Hypotheses { beta, gamma });
    }
    if k_range < 1 {
        return Err(ScanError::EmptyRange);
    }
    let kr = k_range;
    let cut = 8 * kr;
    // With m = n − k₁ and d = k₁ − k₂ the summand is ⟨m⟩^{-β}⟨m + d⟩^{-γ};
    // m runs over [−cut − k₁, cut − k₁] ⊂ [−9kr, 9kr].
    let m_lo = -(cut + kr);
    let m_hi = cut + kr;
    let len = (m_hi - m_lo + 1) as usize;
    let left: Vec<f64> = (m_lo..=m_hi).map(|m| bracket(m as f64).powf(-beta)).collect();
    let mut prefix = vec![0.0f64; len + 1];
    let mut best = (f64::NEG_INFINITY, (0, 0));
    let mut min_rhs = f64::INFINITY;
    for d in -2 * kr..=2 * kr {
        let rhs = bracket(d as f64).powf(-gamma) * phi_beta(d, beta)?;
        for (i, m) in (m_lo..=m_hi).enumerate() {
            let term = left[i] * bracket((m + d) as f64).powf(-gamma);
            prefix[i + 1] = prefix[i] + term;
        }
        let k1_lo = (-kr).max(d - kr);
        let k1_hi = kr.min(d + kr);
        if k1_lo > k1_hi {
            continue;
        }
        min_rhs = min_rhs.min(rhs);
        for k1 in k1_lo..=k1_hi {
            let a = (-cut - k1 - m_lo) as usize;
            let b = (cut - k1 - m_lo) as usize;
            let lhs = prefix[b + 1] - prefix[a];
            let ratio = lhs / rhs;
            if ratio > best.0 {
                best = (ratio, (k1, k1 - d));
            }
        }
    }
    // For |n| > 8kr, |n − kᵢ| ≥ 7|n|/8, so each omitted term is at most
    // (7|n|/8)^{-(β+γ)}; compare with the integral from 8kr.
    let s = beta + gamma;
    let tail_bound = 2.0 * (8.0f64 / 7.0).powf(s) * (cut as f64).powf(1.0 - s) / (s - 1.0);
    Ok(LemmaScanResult {
        beta,
        gamma,
        k_range,
        sup_ratio: best.0,
        argmax: best.1,
        tail_bound,
        ratio_tail_bound: tail_bound / min_rhs,
    })
}

/// Largest grid accepted by the direct Picard sums.
pub const PICARD_MAX_MODES: usize = 512;

/// Which terms of the first iterate to keep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PicardTerms {
    /// Only triples with nonzero phase.
    NonresonantOnly,
    /// Also the diagonal contribution `−it|ĝ_k|²ĝ_k`, which is what the
    /// gauge-corrected remainder contains at first order.
    #[default]
    Full,
}

/// First Picard iterate of the nonlinear remainder at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PicardField {
    pub t: f64,
    pub terms: PicardTerms,
    pub field: FourierField,
}

impl PicardField {
    pub fn grid(&self) -> GridSpec {
        self.field.grid()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.field.coeffs()
    }
}

fn check_grid(g: &FourierField) -> Result<(), ScanError> {
    let n = g.grid().n_modes();
    if n > PICARD_MAX_MODES {
        return Err(ScanError::GridTooLarge {
            got: n,
            max: PICARD_MAX_MODES,
        });
    }
    Ok(())
}

/// `(e^{iΦt} − 1)/Φ`.
#[inline]
fn duhamel_weight(phi: i64, t: f64) -> Complex64 {
    (Complex64::from_polar(1.0, phi as f64 * t) - 1.0) / phi as f64
}

/// `e^{-ik²t}`.
#[inline]
fn free_phase(k: i64, t: f64) -> Complex64 {
    let turns = quadratic_phase_turns(k, t / std::f64::consts::TAU);
    Complex64::from_polar(1.0, -std::f64::consts::TAU * turns)
}

/// First-order remainder in the indexing `ĝ(k₁) conj(ĝ(k₂)) ĝ(k₃)`,
/// `k = k₁ − k₂ + k₃`, phase `Φ = 2(k₁ − k₂)(k₃ − k₂)`:
///
/// `e^{-ik²t} [Σ_{Φ≠0} (e^{iΦt} − 1)/Φ · ĝĝ̄ĝ − it|ĝ_k|²ĝ_k]`,
///
/// the last term only with [`PicardTerms::Full`]. Resonant triples are
/// skipped before any division.
pub fn picard_iterate(g: &FourierField, t: f64, terms: PicardTerms) -> Result<PicardField, ScanError> {
    check_grid(g)?;
    let grid = g.grid();
    let (lo, hi) = (grid.min_mode(), grid.max_mode());
    let field = FourierField::from_fn(grid, |k| {
        let mut sum = Complex64::new(0.0, 0.0);
        for k1 in lo..=hi {
            let a = g.coeff(k1);
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for k2 in lo..=hi {
                let k3 = k - k1 + k2;
                if k1 == k2 || k3 == k2 || !(lo..=hi).contains(&k3) {
                    continue;
                }
                let phi = 2 * (k1 - k2) * (k3 - k2);
                sum += a * g.coeff(k2).conj() * g.coeff(k3) * duhamel_weight(phi, t);
            }
        }
        if terms == PicardTerms::Full {
            let c = g.coeff(k);
            sum -= Complex64::new(0.0, t) * c * c.norm_sqr();
        }
        sum * free_phase(k, t)
    });
    Ok(PicardField { t, terms, field })
}

/// The nonresonant first iterate written over `k₁ + k₂ + k₃ = k` with
/// weight `(e^{2i(k₁+k₂)(k₂+k₃)t} − 1)/(2(k₁+k₂)(k₂+k₃))`. The middle
/// factor is `conj(ĝ(−k₂))` when `conjugate_middle` is set and `ĝ(k₂)`
/// otherwise; `k₂` runs over the negated grid so the two indexings cover
/// the same triples.
pub fn picard_iterate_symmetric(
    g: &FourierField,
    t: f64,
    conjugate_middle: bool,
) -> Result<PicardField, ScanError> {
    check_grid(g)?;
    let grid = g.grid();
    let (lo, hi) = (grid.min_mode(), grid.max_mode());
    let middle = |k2: i64| {
        if conjugate_middle {
            g.coeff(-k2).conj()
        } else {
            g.coeff(k2)
        }
    };
    let field = FourierField::from_fn(grid, |k| {
        let mut sum = Complex64::new(0.0, 0.0);
        for k1 in lo..=hi {
            let a = g.coeff(k1);
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for k2 in -hi..=-lo {
                let k3 = k - k1 - k2;
                let (p, q) = (k1 + k2, k2 + k3);
                if p == 0 || q == 0 || !(lo..=hi).contains(&k3) {
                    continue;
                }
                sum += a * middle(k2) * g.coeff(k3) * duhamel_weight(2 * p * q, t);
            }
        }
        sum * free_phase(k, t)
    });
    Ok(PicardField {
        t,
        terms: PicardTerms::NonresonantOnly,
        field,
    })
}
