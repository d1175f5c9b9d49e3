//! Box-counting dimension of solution graphs, Littlewood–Paley regularity
//! fits, and the rational/irrational increment scan.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::line_fit;
use crate::nls::{evolve, Dealias, SolverConfig};
use crate::spectral::{
    block_lp_norms, inverse_transform, propagate_rational, propagate_turns, FourierField,
    GridSpec, SpectralError,
};
use crate::time::TaggedTime;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("graph needs at least {needed} samples, got {got}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("{xs} abscissae but {ys} ordinates")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("abscissae must be uniformly spaced, increasing and inside [0, 2π)")]
    NonUniform,
    #[error("non-finite graph value at index {0}")]
    NonFinite(usize),
    #[error("ε = {eps} is outside the admissible range [{min}, {max}]")]
    EpsOutOfRange { eps: f64, min: f64, max: f64 },
    #[error("ε range [{lo}, {hi}] spans {octaves:.2} octaves, need at least 3")]
    NarrowRange { lo: f64, hi: f64, octaves: f64 },
    #[error("ε ladder has {points} points, need at least {needed}")]
    LadderTooShort { points: usize, needed: usize },
    #[error("{usable} usable dyadic blocks, need at least {needed}")]
    TooFewBlocks { usable: usize, needed: usize },
    #[error("graph is flat; no dimension to estimate")]
    FlatGraph,
    #[error("resolution {0} is finer than the datum's grid")]
    ResolutionTooFine(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub const MIN_GRAPH_SAMPLES: usize = 256;
pub const MIN_LADDER_POINTS: usize = 6;
pub const MIN_OCTAVES: f64 = 3.0;
pub const MIN_BESOV_BLOCKS: usize = 5;

/// Which part of a complex field is graphed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Re,
    Im,
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::Re => "re",
            Component::Im => "im",
        }
    }
}

/// Scaling applied to a graph before box counting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    /// Rescale `y` so that its range equals the period.
    #[default]
    Square,
    /// Count the graph as sampled.
    Raw,
}

/// Uniformly sampled graph of a real function over one period. The
/// interpolant closes periodically from the last sample back to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSamples {
    x0: f64,
    h: f64,
    ys: Vec<f64>,
}

impl GraphSamples {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, AnalysisError> {
        if xs.len() != ys.len() {
            return Err(AnalysisError::LengthMismatch {
                xs: xs.len(),
                ys: ys.len(),
            });
        }
        if xs.len() < MIN_GRAPH_SAMPLES {
            return Err(AnalysisError::TooFewSamples {
                got: xs.len(),
                needed: MIN_GRAPH_SAMPLES,
            });
        }
        let x0 = xs[0];
        let h = xs[1] - xs[0];
        let uniform = h > 0.0
            && x0 >= 0.0
            && xs[xs.len() - 1] < TAU
            && xs
                .iter()
                .enumerate()
                .all(|(j, &x)| (x - (x0 + j as f64 * h)).abs() <= 1e-9 * (1.0 + x.abs()));
        if !uniform {
            return Err(AnalysisError::NonUniform);
        }
        Self::from_uniform(x0, h, ys)
    }

    fn from_uniform(x0: f64, h: f64, ys: Vec<f64>) -> Result<Self, AnalysisError> {
        if ys.len() < MIN_GRAPH_SAMPLES {
            return Err(AnalysisError::TooFewSamples {
                got: ys.len(),
                needed: MIN_GRAPH_SAMPLES,
            });
        }
        if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
            return Err(AnalysisError::NonFinite(i));
        }
        Ok(Self { x0, h, ys })
    }

    /// Samples `f` at `2πj/n`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self, AnalysisError> {
        let h = TAU / n as f64;
        Self::from_uniform(0.0, h, (0..n).map(|j| f(j as f64 * h)).collect())
    }

    /// Graph of `Re u` or `Im u` at the grid points.
    pub fn from_field(u: &FourierField, component: Component) -> Result<Self, AnalysisError> {
        let samples = inverse_transform(u);
        let ys = match component {
            Component::Re => samples.real_parts(),
            Component::Im => samples.imag_parts(),
        };
        Self::from_uniform(0.0, u.grid().spacing(), ys)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x0 + j as f64 * self.h).collect()
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn period(&self) -> f64 {
        self.h * self.len() as f64
    }

    pub fn y_bounds(&self) -> (f64, f64) {
        self.ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)))
    }

    pub fn y_range(&self) -> f64 {
        let (lo, hi) = self.y_bounds();
        hi - lo
    }

    /// Whether the oscillation is at roundoff level.
    pub fn is_flat(&self) -> bool {
        let (lo, hi) = self.y_bounds();
        hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs()))
    }

    /// Copy with `y` mapped affinely onto `[0, period]`. Flat graphs are
    /// returned unchanged.
    pub fn squared(&self) -> Self {
        if self.is_flat() {
            return self.clone();
        }
        let (lo, hi) = self.y_bounds();
        let scale = self.period() / (hi - lo);
        Self {
            x0: self.x0,
            h: self.h,
            ys: self.ys.iter().map(|y| (y - lo) * scale).collect(),
        }
    }

    fn with_aspect(&self, aspect: Aspect) -> Self {
        match aspect {
            Aspect::Square => self.squared(),
            Aspect::Raw => self.clone(),
        }
    }

    /// `[4h, max(y range, period)]`.
    pub fn admissible_eps(&self) -> (f64, f64) {
        (4.0 * self.h, self.y_range().max(self.period()))
    }

    /// Default fitting window `[4h, y range / 4]`, or a quarter period for
    /// flat graphs.
    pub fn default_eps_range(&self) -> (f64, f64) {
        let top = if self.is_flat() {
            self.period()
        } else {
            self.y_range()
        };
        (4.0 * self.h, top / 4.0)
    }

    /// Value of the periodic piecewise-linear interpolant at offset `s`
    /// from `x0`, for `0 ≤ s ≤ period`.
    fn interpolate(&self, s: f64) -> f64 {
        let n = self.len();
        let pos = s / self.h;
        let j = (pos.floor() as usize).min(n - 1);
        let frac = pos - j as f64;
        let a = self.ys[j];
        let b = self.ys[(j + 1) % n];
        a + frac * (b - a)
    }
}

fn within(eps: f64, (lo, hi): (f64, f64)) -> bool {
    let tol = 1e-9;
    eps >= lo * (1.0 - tol) && eps <= hi * (1.0 + tol)
}

/// Number of boxes of the lattice `εZ × εZ` (anchored at the first
/// abscissa and at `y = 0`) met by the piecewise-linear interpolant.
pub fn box_count(graph: &GraphSamples, eps: f64) -> Result<usize, AnalysisError> {
    let (min, max) = graph.admissible_eps();
    if !(eps.is_finite() && within(eps, (min, max))) {
        return Err(AnalysisError::EpsOutOfRange { eps, min, max });
    }
    Ok(count_boxes(graph, eps))
}

fn count_boxes(graph: &GraphSamples, eps: f64) -> usize {
    let n = graph.len();
    let h = graph.h;
    let period = graph.period();
    let columns = ((period / eps) - 1e-9).ceil().max(1.0) as usize;
    let sample = |j: usize| graph.ys[j % n];
    let mut total = 0usize;
    let mut j = 1usize;
    for col in 0..columns {
        let a = col as f64 * eps;
        let b = ((col + 1) as f64 * eps).min(period);
        let ya = graph.interpolate(a);
        let yb = graph.interpolate(b);
        let (mut lo, mut hi) = (ya.min(yb), ya.max(yb));
        while j <= n && (j as f64) * h <= a {
            j += 1;
        }
        while j <= n && (j as f64) * h < b {
            let y = sample(j);
            lo = lo.min(y);
            hi = hi.max(y);
            j += 1;
        }
        total += ((hi / eps).floor() - (lo / eps).floor()) as usize + 1;
    }
    total
}

/// Geometric ladder `lo, lo√2, …` up to `hi`.
pub fn eps_ladder(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let eps = lo * SQRT_2.powi(i);
        if eps > hi * (1.0 + 1e-9) {
            break;
        }
        out.push(eps);
        i += 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// Slope of `log N(ε)` against `log(1/ε)`, unclamped.
    pub dimension: f64,
    pub r_squared: f64,
    pub eps_range: (f64, f64),
    pub counts: Vec<(f64, usize)>,
    /// Set when `dimension` falls outside `[1, 2]`.
    pub out_of_range: bool,
}

/// Box-counting dimension fitted over the √2-ladder spanning `eps_range`.
pub fn minkowski_dimension(
    graph: &GraphSamples,
    eps_range: (f64, f64),
) -> Result<DimensionEstimate, AnalysisError> {
    let (lo, hi) = eps_range;
    let admissible = graph.admissible_eps();
    for eps in [lo, hi] {
        if !(eps.is_finite() && within(eps, admissible)) {
            return Err(AnalysisError::EpsOutOfRange {
                eps,
                min: admissible.0,
                max: admissible.1,
            });
        }
    }
    let octaves = (hi / lo).log2();
    if !(octaves >= MIN_OCTAVES - 1e-9) {
        return Err(AnalysisError::NarrowRange { lo, hi, octaves });
    }
    let ladder = eps_ladder(lo, hi);
    if ladder.len() < MIN_LADDER_POINTS {
        return Err(AnalysisError::LadderTooShort {
            points: ladder.len(),
            needed: MIN_LADDER_POINTS,
        });
    }
    let counts: Vec<(f64, usize)> = ladder.iter().map(|&e| (e, count_boxes(graph, e))).collect();
    let xs: Vec<f64> = counts.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let fit = line_fit(&xs, &ys).expect("ladder has distinct scales");
    Ok(DimensionEstimate {
        dimension: fit.slope,
        r_squared: fit.r_squared,
        eps_range: (ladder[0], *ladder.last().expect("nonempty ladder")),
        counts,
        out_of_range: !(1.0..=2.0).contains(&fit.slope),
    })
}

/// Dimension estimates of the real and imaginary graphs of a field. Flat
/// components are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDimension {
    pub re: Option<DimensionEstimate>,
    pub im: Option<DimensionEstimate>,
}

impl FieldDimension {
    /// The component with the larger dimension.
    pub fn max(&self) -> Option<(Component, &DimensionEstimate)> {
        let re = self.re.as_ref().map(|d| (Component::Re, d));
        let im = self.im.as_ref().map(|d| (Component::Im, d));
        match (re, im) {
            (Some(a), Some(b)) => Some(if b.1.dimension > a.1.dimension { b } else { a }),
            (a, b) => a.or(b),
        }
    }
}

/// Fits both components over their default windows after applying `aspect`.
pub fn field_dimension(u: &FourierField, aspect: Aspect) -> Result<FieldDimension, AnalysisError> {
    let mut out = FieldDimension { re: None, im: None };
    for component in [Component::Re, Component::Im] {
        let graph = GraphSamples::from_field(u, component)?;
        if graph.is_flat() {
            continue;
        }
        let graph = graph.with_aspect(aspect);
        let est = minkowski_dimension(&graph, graph.default_eps_range())?;
        match component {
            Component::Re => out.re = Some(est),
            Component::Im => out.im = Some(est),
        }
    }
    if out.re.is_none() && out.im.is_none() {
        return Err(AnalysisError::FlatGraph);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    /// `s*`, minus the slope of `log₂ ‖P_j u‖_p` against `j`.
    pub exponent: f64,
    pub p: f64,
    pub r_squared: f64,
    /// First and last block used in the fit.
    pub j_range: (u32, u32),
    /// `(j, ‖P_j u‖_p)` for every fitted block.
    pub block_norms: Vec<(u32, f64)>,
}

/// Fits the critical Besov exponent from the dyadic blocks `j ≥ 2` lying
/// inside the dealiasing cutoff. Blocks with zero norm are dropped.
pub fn besov_critical_exponent(u: &FourierField, p: f64) -> Result<RegularityReport, AnalysisError> {
    let cutoff = u.grid().dealias_cutoff();
    let norms = block_lp_norms(u, p)?;
    let peak = norms.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let usable: Vec<(u32, f64)> = norms
        .into_iter()
        .filter(|&(j, v)| j >= 2 && (1i64 << j) <= cutoff && v > 1e-14 * peak && v > 0.0)
        .collect();
    if usable.len() < MIN_BESOV_BLOCKS {
        return Err(AnalysisError::TooFewBlocks {
            usable: usable.len(),
            needed: MIN_BESOV_BLOCKS,
        });
    }
    let xs: Vec<f64> = usable.iter().map(|(j, _)| *j as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|(_, v)| v.log2()).collect();
    let fit = line_fit(&xs, &ys).expect("distinct blocks");
    Ok(RegularityReport {
        exponent: -fit.slope,
        p,
        r_squared: fit.r_squared,
        j_range: (usable[0].0, usable[usable.len() - 1].0),
        block_norms: usable,
    })
}

/// `max_j |u(x_{j+1}) − u(x_j)|` over the grid, closing periodically.
pub fn max_increment(u: &FourierField) -> f64 {
    let s = inverse_transform(u);
    let samples = s.samples();
    let n = samples.len();
    (0..n)
        .map(|j| (samples[(j + 1) % n] - samples[j]).norm())
        .fold(0.0, f64::max)
}

/// Which flow the dichotomy scan applies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    /// Exact free evolution.
    Linear,
    /// Split-step solution of the cubic equation.
    Nonlinear { dt: f64, dealias: Dealias },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyRow {
    pub label: String,
    pub t: f64,
    pub rational: bool,
    /// `(n_modes, max increment)`, coarsest first.
    pub increments: Vec<(usize, f64)>,
    /// Coarsest increment over finest increment.
    pub refinement_ratio: f64,
    /// Graph dimension at the finest resolution.
    pub dimension: Option<FieldDimension>,
}

/// For each time, the maximal grid increment at every resolution and the
/// graph dimension at the finest one. `g` is truncated to each resolution,
/// which must not exceed its own.
pub fn dichotomy_scan(
    g: &FourierField,
    times: &[TaggedTime],
    resolutions: &[usize],
    flow: Flow,
    aspect: Aspect,
) -> crate::Result<Vec<DichotomyRow>> {
    let mut resolutions = resolutions.to_vec();
    resolutions.sort_unstable();
    resolutions.dedup();
    let mut per_resolution: Vec<Vec<FourierField>> = Vec::with_capacity(resolutions.len());
    for &n in &resolutions {
        if n > g.grid().n_modes() {
            return Err(AnalysisError::ResolutionTooFine(n).into());
        }
        let grid = GridSpec::new(n)?;
        let datum = g.resampled(grid);
        per_resolution.push(evolve_to(&datum, times, flow)?);
    }
    let mut rows = Vec::with_capacity(times.len());
    for (i, time) in times.iter().enumerate() {
        let increments: Vec<(usize, f64)> = resolutions
            .iter()
            .zip(&per_resolution)
            .map(|(&n, fields)| (n, max_increment(&fields[i])))
            .collect();
        let refinement_ratio = match (increments.first(), increments.last()) {
            (Some(a), Some(b)) if b.1 > 0.0 => a.1 / b.1,
            _ => f64::NAN,
        };
        let dimension = match per_resolution.last() {
            Some(fields) => match field_dimension(&fields[i], aspect) {
                Ok(d) => Some(d),
                Err(AnalysisError::FlatGraph) => None,
                Err(e) => return Err(e.into()),
            },
            None => None,
        };
        rows.push(DichotomyRow {
            label: time.label(),
            t: time.seconds(),
            rational: time.is_rational(),
            increments,
            refinement_ratio,
            dimension,
        });
    }
    Ok(rows)
}

/// Solution at each of `times`, in the given order.
fn evolve_to(g: &FourierField, times: &[TaggedTime], flow: Flow) -> crate::Result<Vec<FourierField>> {
    match flow {
        Flow::Linear => Ok(times
            .iter()
            .map(|t| match t {
                TaggedTime::Rational(r) => propagate_rational(g, *r),
                other => propagate_turns(g, other.turns()),
            })
            .collect()),
        Flow::Nonlinear { dt, dealias } => {
            let mut order: Vec<f64> = times.iter().map(|t| t.seconds()).collect();
            order.sort_by(f64::total_cmp);
            order.dedup();
            let result = evolve(g, &SolverConfig::new(dt, dealias, order))?;
            times
                .iter()
                .map(|t| {
                    result
                        .snapshot(t.seconds())
                        .cloned()
                        .ok_or_else(|| crate::nls::SolverError::MissingSnapshot(t.seconds()).into())
                })
                .collect()
        }
    }
}

/// Samples of the lacunary series `Σ_{j=1}^{terms} 2^{-jα} cos(2^j x)` at
/// `n` points, evaluated directly.
pub fn weierstrass_graph(alpha: f64, terms: u32, n: usize) -> Result<GraphSamples, AnalysisError> {
    GraphSamples::from_fn(n, |x| {
        (1..=terms)
            .map(|j| (-(j as f64) * alpha).exp2() * ((1u64 << j) as f64 * x).cos())
            .sum()
    })
}
