//! Exact and tagged evolution times.
//!
//! Times are measured in "turns" where convenient: `t = 2π · turns`. Rational
//! turns make the free propagator periodic in the mode index, which is what
//! the quantization module exploits.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Error;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// `t = 2π p / q` with `gcd(|p|, q) = 1` and `q > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i64, i64)", into = "(i64, i64)")]
pub struct RationalTime {
    p: i64,
    q: u64,
}

impl RationalTime {
    /// Builds a rational time, reducing to lowest terms. A negative `q` flips
    /// the sign of both entries; `q = 0` is rejected.
    pub fn new(p: i64, q: i64) -> Result<Self, Error> {
        if q == 0 {
            return Err(Error::Time("rational time with zero denominator".into()));
        }
        let (p, q) = if q < 0 { (-p, -q) } else { (p, q) };
        let q = q as u64;
        if p == 0 {
            return Ok(Self { p: 0, q: 1 });
        }
        let g = gcd(p.unsigned_abs(), q);
        Ok(Self {
            p: p / g as i64,
            q: q / g,
        })
    }

    pub fn zero() -> Self {
        Self { p: 0, q: 1 }
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn turns(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn seconds(&self) -> f64 {
        TAU * self.turns()
    }
}

impl TryFrom<(i64, i64)> for RationalTime {
    type Error = Error;

    fn try_from((p, q): (i64, i64)) -> Result<Self, Error> {
        RationalTime::new(p, q)
    }
}

impl From<RationalTime> for (i64, i64) {
    fn from(rt: RationalTime) -> Self {
        (rt.p, rt.q as i64)
    }
}

impl fmt::Display for RationalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

/// Badly approximable irrational times, used as stand-ins for "generic"
/// irrational `t / 2π`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrrationalPreset {
    /// frac(√2) = √2 − 1
    Sqrt2,
    /// frac of the golden ratio, (√5 − 1)/2
    Golden,
    /// frac(√3) = √3 − 1
    Sqrt3,
}

impl IrrationalPreset {
    pub const ALL: [IrrationalPreset; 3] = [Self::Sqrt2, Self::Golden, Self::Sqrt3];

    pub fn turns(&self) -> f64 {
        match self {
            Self::Sqrt2 => std::f64::consts::SQRT_2 - 1.0,
            Self::Golden => (5f64.sqrt() - 1.0) / 2.0,
            Self::Sqrt3 => 3f64.sqrt() - 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sqrt2 => "sqrt2",
            Self::Golden => "golden",
            Self::Sqrt3 => "sqrt3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// A time tagged by its arithmetic nature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaggedTime {
    Rational(RationalTime),
    Preset(IrrationalPreset),
    /// Plain time in the equation's units (not turns).
    Real(f64),
}

impl TaggedTime {
    pub fn turns(&self) -> f64 {
        match self {
            Self::Rational(r) => r.turns(),
            Self::Preset(p) => p.turns(),
            Self::Real(t) => t / TAU,
        }
    }

    pub fn seconds(&self) -> f64 {
        match self {
            Self::Real(t) => *t,
            other => TAU * other.turns(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Rational(r) => r.to_string(),
            Self::Preset(p) => p.name().to_string(),
            Self::Real(t) => format!("t={t}"),
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Self::Rational(_))
    }
}
