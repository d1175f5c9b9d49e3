//! Run manifests: a versioned TOML document describing one experiment.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use talbot_core::fractal::Aspect;
use talbot_core::nls::{Dealias, SolverConfig};
use talbot_core::verification::PicardTerms;
use talbot_core::{GridSpec, TaggedTime};

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_N_MODES: usize = 4096;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_OUT_DIR: &str = "talbot-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Evolve,
    Quantize,
    Dichotomy,
    Smoothing,
    LemmaScan,
    PicardCheck,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::Quantize => "quantize",
            Experiment::Dichotomy => "dichotomy",
            Experiment::Smoothing => "smoothing",
            Experiment::LemmaScan => "lemma-scan",
            Experiment::PicardCheck => "picard-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatumSpec {
    /// Real step function; `breakpoints[i]` starts plateau `values[i]`.
    Step {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Explicit coefficients `[k, re, im]`.
    Modes {
        modes: Vec<(i64, f64, f64)>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Seeded random band-limited coefficients with `|k| ≤ k_max`, decaying
    /// like `1 / (1 + k²)`.
    Random {
        k_max: i64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for DatumSpec {
    fn default() -> Self {
        DatumSpec::Step {
            breakpoints: vec![0.0, std::f64::consts::PI],
            values: vec![1.0, 0.0],
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_modes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub dealias: Dealias,
    #[serde(default)]
    pub gauge_shift: f64,
    #[serde(default)]
    pub energy_stride: usize,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            dealias: Dealias::default(),
            gauge_shift: 0.0,
            energy_stride: 0,
        }
    }
}

impl SolverSection {
    pub fn config(&self, snapshot_times: Vec<f64>) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.dt, self.dealias, snapshot_times);
        cfg.gauge_shift = self.gauge_shift;
        cfg.energy_stride = self.energy_stride;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub dir: PathBuf,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from(DEFAULT_OUT_DIR),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeSection {
    /// Denominators; every `p` in `[0, q)` coprime to `q` is run.
    pub q: Vec<u64>,
    #[serde(default = "quantize_tolerance")]
    pub tolerance: f64,
}

fn quantize_tolerance() -> f64 {
    1e-10
}

impl Default for QuantizeSection {
    fn default() -> Self {
        Self {
            q: vec![2, 3, 4, 5, 7, 8],
            tolerance: quantize_tolerance(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    #[default]
    Linear,
    Nonlinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomySection {
    /// Mode counts, each at most `grid.n_modes`.
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub flow: FlowKind,
    #[serde(default)]
    pub aspect: Aspect,
    /// Minimum coarse/fine increment ratio at irrational times.
    #[serde(default = "two")]
    pub min_irrational_decay: f64,
    /// Allowed relative change of the increment at rational times.
    #[serde(default = "point_two")]
    pub rational_tolerance: f64,
}

fn two() -> f64 {
    2.0
}

fn point_two() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    /// Inclusive `|k|` window for the decay fits; defaults to the grid's
    /// upper tail.
    #[serde(default)]
    pub window: Option<(i64, i64)>,
    #[serde(default = "point_four")]
    pub min_gain: f64,
}

fn point_four() -> f64 {
    0.4
}

impl Default for SmoothingSection {
    fn default() -> Self {
        Self {
            window: None,
            min_gain: point_four(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaScanSection {
    /// `[β, γ]` pairs.
    pub params: Vec<(f64, f64)>,
    pub k_range: i64,
    /// Allowed relative change of the supremum when the range doubles.
    #[serde(default = "point_one")]
    pub tolerance: f64,
}

fn point_one() -> f64 {
    0.1
}

impl Default for LemmaScanSection {
    fn default() -> Self {
        Self {
            params: vec![(2.0, 0.6), (1.0, 0.9), (0.8, 0.8)],
            k_range: 256,
            tolerance: point_one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    /// Amplitudes, largest first; each is half the previous one.
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub terms: PicardTerms,
    /// Largest accepted deviation ratio between consecutive amplitudes.
    #[serde(default = "point_three_five")]
    pub max_ratio: f64,
}

fn point_three_five() -> f64 {
    0.35
}

impl Default for PicardSection {
    fn default() -> Self {
        Self {
            amplitudes: vec![0.02, 0.01],
            terms: PicardTerms::Full,
            max_ratio: point_three_five(),
        }
    }
}

/// Manifest as written by a user. Everything except `version` is optional
/// here; [`resolve`](crate::manifest::resolve) fills in defaults.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawManifest {
    pub version: Option<u32>,
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub times: Option<Vec<TaggedTime>>,
    pub datum: Option<DatumSpec>,
    pub grid: Option<GridSection>,
    pub solver: Option<SolverSection>,
    pub outputs: Option<OutputsSection>,
    pub quantize: Option<QuantizeSection>,
    pub dichotomy: Option<DichotomySection>,
    pub smoothing: Option<SmoothingSection>,
    pub lemma_scan: Option<LemmaScanSection>,
    pub picard: Option<PicardSection>,
}

/// Fully resolved manifest; this is what gets written back next to the
/// results and hashed into their provenance lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: u32,
    pub experiment: Experiment,
    pub seed: u64,
    pub times: Vec<TaggedTime>,
    pub datum: DatumSpec,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub outputs: OutputsSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantize: Option<QuantizeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<DichotomySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma_scan: Option<LemmaScanSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSection>,
}

impl RunManifest {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.grid.n_modes).expect("validated grid")
    }

    /// Canonical TOML text of the resolved manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Command-line values that take precedence over the manifest.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub out_dir: Option<PathBuf>,
}

/// Every problem found while validating a manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestErrors(pub Vec<String>);

impl fmt::Display for ManifestErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ManifestErrors {}

/// Parses, checks and canonicalizes manifest text.
pub fn validate(text: &str, overrides: &Overrides) -> Result<RunManifest, ManifestErrors> {
    let raw: RawManifest =
        toml::from_str(text).map_err(|e| ManifestErrors(vec![describe_parse_error(text, &e)]))?;
    resolve(raw, overrides)
}

/// Adds a "did you mean" hint to serde's unknown-field messages.
fn describe_parse_error(text: &str, e: &toml::de::Error) -> String {
    let message = e.message();
    let mut out = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line}, column {column}: {message}")
        }
        None => message.to_string(),
    };
    if let Some(hint) = unknown_field_hint(message) {
        out.push_str(&format!("; did you mean `{hint}`?"));
    }
    out
}

fn unknown_field_hint(message: &str) -> Option<String> {
    let rest = message.strip_prefix("unknown field `")?;
    let (field, rest) = rest.split_once('`')?;
    let candidates: Vec<&str> = rest.split('`').skip(1).step_by(2).collect();
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(field, c), c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c.to_string())
}

pub fn resolve(raw: RawManifest, overrides: &Overrides) -> Result<RunManifest, ManifestErrors> {
    let mut errors = Vec::new();
    match raw.version {
        Some(MANIFEST_VERSION) => {}
        Some(v) => errors.push(format!("version: unsupported manifest version {v} (expected {MANIFEST_VERSION})")),
        None => errors.push(format!("version: missing; add `version = {MANIFEST_VERSION}`")),
    }
    let experiment = overrides.experiment.or(raw.experiment);
    if experiment.is_none() {
        errors.push("experiment: missing; set it in the manifest or use a subcommand".to_string());
    }
    let grid = raw.grid.unwrap_or(GridSection {
        n_modes: DEFAULT_N_MODES,
    });
    if let Err(e) = GridSpec::new(grid.n_modes) {
        errors.push(format!("grid.n_modes: {e}"));
    }
    let solver = raw.solver.unwrap_or_default();
    if !(solver.dt > 0.0 && solver.dt <= 1e-2) {
        errors.push(format!("solver.dt: must lie in (0, 1e-2], got {}", solver.dt));
    }
    if !solver.gauge_shift.is_finite() {
        errors.push("solver.gauge_shift: must be finite".to_string());
    }
    let datum = raw.datum.unwrap_or_default();
    check_datum(&datum, &mut errors);
    let mut times = raw.times.unwrap_or_default();
    for (i, t) in times.iter().enumerate() {
        if !(t.seconds().is_finite() && t.seconds() >= 0.0) {
            errors.push(format!("times[{i}]: must be finite and nonnegative"));
        }
    }
    times.sort_by(|a, b| a.seconds().total_cmp(&b.seconds()));

    let mut m = RunManifest {
        version: MANIFEST_VERSION,
        experiment: experiment.unwrap_or(Experiment::Evolve),
        seed: raw.seed.unwrap_or(0),
        times,
        datum,
        grid,
        solver,
        outputs: raw.outputs.unwrap_or_default(),
        quantize: raw.quantize,
        dichotomy: raw.dichotomy,
        smoothing: raw.smoothing,
        lemma_scan: raw.lemma_scan,
        picard: raw.picard,
    };
    if let Some(dir) = &overrides.out_dir {
        m.outputs.dir = dir.clone();
    }
    if experiment.is_some() {
        check_experiment(&mut m, &mut errors);
    }
    if errors.is_empty() {
        Ok(m)
    } else {
        Err(ManifestErrors(errors))
    }
}

fn check_datum(datum: &DatumSpec, errors: &mut Vec<String>) {
    match datum {
        DatumSpec::Step {
            breakpoints,
            values,
            amplitude,
        } => {
            if let Err(e) = talbot_core::initial_data::StepDataSpec::real(breakpoints.clone(), values.clone()) {
                errors.push(format!("datum: {e}"));
            }
            if !amplitude.is_finite() {
                errors.push("datum.amplitude: must be finite".to_string());
            }
        }
        DatumSpec::Modes { modes, amplitude } => {
            if modes.is_empty() {
                errors.push("datum.modes: at least one mode is required".to_string());
            }
            if modes.iter().any(|(_, re, im)| !(re.is_finite() && im.is_finite())) || !amplitude.is_finite() {
                errors.push("datum.modes: coefficients must be finite".to_string());
            }
        }
        DatumSpec::Random { k_max, amplitude } => {
            if *k_max < 0 {
                errors.push("datum.k_max: must be nonnegative".to_string());
            }
            if !amplitude.is_finite() {
                errors.push("datum.amplitude: must be finite".to_string());
            }
        }
    }
}

fn needs_times(m: &RunManifest, errors: &mut Vec<String>) {
    if m.times.is_empty() {
        errors.push(format!("times: the {} experiment needs at least one time", m.experiment));
    }
}

fn check_experiment(m: &mut RunManifest, errors: &mut Vec<String>) {
    match m.experiment {
        Experiment::Evolve => needs_times(m, errors),
        Experiment::Quantize => {
            let q = m.quantize.get_or_insert_with(QuantizeSection::default);
            if q.q.is_empty() || q.q.contains(&0) {
                errors.push("quantize.q: needs positive denominators".to_string());
            }
        }
        Experiment::Dichotomy => {
            needs_times(m, errors);
            let n = m.grid.n_modes;
            let d = m.dichotomy.get_or_insert_with(|| DichotomySection {
                resolutions: vec![n / 4, n / 2, n].into_iter().filter(|&r| r >= 8).collect(),
                flow: FlowKind::Linear,
                aspect: Aspect::Square,
                min_irrational_decay: two(),
                rational_tolerance: point_two(),
            });
            d.resolutions.sort_unstable();
            d.resolutions.dedup();
            if d.resolutions.is_empty() {
                errors.push("dichotomy.resolutions: at least one resolution is required".to_string());
            }
            for &r in &d.resolutions {
                if GridSpec::new(r).is_err() || r > n {
                    errors.push(format!(
                        "dichotomy.resolutions: {r} must be a power of two in [8, grid.n_modes = {n}]"
                    ));
                }
            }
        }
        Experiment::Smoothing => {
            needs_times(m, errors);
            let s = m.smoothing.get_or_insert_with(SmoothingSection::default);
            if let Some((lo, hi)) = s.window {
                if !(1 <= lo && lo < hi) {
                    errors.push("smoothing.window: need 1 ≤ lo < hi".to_string());
                }
            }
        }
        Experiment::LemmaScan => {
            let l = m.lemma_scan.get_or_insert_with(LemmaScanSection::default);
            if l.k_range < 1 {
                errors.push("lemma_scan.k_range: must be positive".to_string());
            }
            for &(b, g) in &l.params {
                if !(b >= g && g >= 0.0 && b + g > 1.0) {
                    errors.push(format!("lemma_scan.params: ({b}, {g}) violates β ≥ γ ≥ 0, β + γ > 1"));
                }
            }
        }
        Experiment::PicardCheck => {
            needs_times(m, errors);
            if m.grid.n_modes > talbot_core::verification::PICARD_MAX_MODES {
                errors.push(format!(
                    "grid.n_modes: picard-check is limited to {} modes",
                    talbot_core::verification::PICARD_MAX_MODES
                ));
            }
            let p = m.picard.get_or_insert_with(PicardSection::default);
            if p.amplitudes.len() < 2 {
                errors.push("picard.amplitudes: need at least two amplitudes".to_string());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use talbot_core::RationalTime;

    fn minimal(extra: &str) -> String {
        format!("version = 1\nexperiment = \"evolve\"\ntimes = [{{ real = 1.0 }}]\n{extra}")
    }

    #[test]
    fn defaults_are_materialized() {
        let m = validate(&minimal(""), &Overrides::default()).unwrap();
        assert_eq!(m.grid.n_modes, DEFAULT_N_MODES);
        assert_eq!(m.solver.dt, DEFAULT_DT);
        assert_eq!(m.solver.dealias, Dealias::ZeroPadding2x);
        assert!(m.to_toml().contains("n_modes = 4096"));
    }

    #[test]
    fn rational_times_are_reduced() {
        let text = "version = 1\nexperiment = \"evolve\"\ntimes = [{ rational = [2, 4] }]\n";
        let m = validate(text, &Overrides::default()).unwrap();
        assert_eq!(m.times, vec![TaggedTime::Rational(RationalTime::new(1, 2).unwrap())]);
        assert!(m.to_toml().contains("rational = [1, 2]"), "{}", m.to_toml());
    }

    #[test]
    fn unknown_key_gets_a_suggestion() {
        let err = validate(&minimal("[solver]\ndealais = \"none\"\n"), &Overrides::default()).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("dealais") && text.contains("did you mean `dealias`"), "{text}");
        assert!(text.starts_with("line 5,"), "{text}");
    }

    #[test]
    fn version_is_mandatory() {
        let err = validate("experiment = \"evolve\"\ntimes = [{ real = 1.0 }]\n", &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("version"));
        let err = validate("version = 2\nexperiment = \"evolve\"\n", &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("unsupported"));
    }

    #[test]
    fn empty_times_names_the_field() {
        let err = validate("version = 1\nexperiment = \"evolve\"\ntimes = []\n", &Overrides::default()).unwrap_err();
        assert!(err.0.iter().any(|e| e.starts_with("times:")), "{err}");
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            experiment: Some(Experiment::Quantize),
            out_dir: Some(PathBuf::from("elsewhere")),
        };
        let m = validate(&minimal(""), &o).unwrap();
        assert_eq!(m.experiment, Experiment::Quantize);
        assert_eq!(m.outputs.dir, PathBuf::from("elsewhere"));
        assert_eq!(m.quantize, Some(QuantizeSection::default()));
    }

    #[test]
    fn resolved_manifest_round_trips() {
        let text = minimal("[datum]\nkind = \"modes\"\nmodes = [[2, 1.0, 0.0]]\n");
        let m = validate(&text, &Overrides::default()).unwrap();
        let again = validate(&m.to_toml(), &Overrides::default()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn bad_sections_are_all_reported() {
        let text = "version = 1\nexperiment = \"dichotomy\"\ntimes = [{ preset = \"sqrt2\" }]\n[grid]\nn_modes = 100\n[solver]\ndt = 0.5\n";
        let err = validate(text, &Overrides::default()).unwrap_err();
        assert!(err.0.len() >= 2, "{err}");
    }
}
