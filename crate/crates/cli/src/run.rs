//! Experiment pipelines. Each one turns a resolved manifest into tables and
//! gates; [`execute`] persists them.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use talbot_core::fractal::{dichotomy_scan, Flow, FieldDimension};
use talbot_core::initial_data::{fit_decay, synthesize_step, tail_window, StepDataSpec};
use talbot_core::nls::{evolve, nonlinear_remainder, physical, resonance_free_dt, SolverError};
use talbot_core::quantization::{quantization_coefficients, quantized_evolution};
use talbot_core::spectral::propagate_rational;
use talbot_core::verification::{lemma1_ratio_scan, picard_iterate};
use talbot_core::{Complex64, FourierField, GridSpec, RationalTime};
use thiserror::Error;

use crate::manifest::{DatumSpec, Experiment, FlowKind, RunManifest};
use crate::output::{digest, write_artifacts, Cell, Gate, Status, Summary, Table};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("could not write artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// What a pipeline produced. `error` is set when it stopped early; the
/// tables then hold whatever was finished.
#[derive(Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub gates: Vec<Gate>,
    pub error: Option<String>,
}

impl Report {
    fn abort(mut self, e: impl std::fmt::Display) -> Self {
        self.error = Some(e.to_string());
        self
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    /// 0 when every gate passed, 1 on a failed gate, 3 on an aborted run.
    pub fn exit_code(&self) -> i32 {
        match self.summary.status {
            Status::Passed => 0,
            Status::GateFailed => 1,
            Status::Aborted => 3,
        }
    }
}

/// Runs the manifest's experiment and writes its artifacts.
pub fn execute(m: &RunManifest, threads: usize) -> Result<Outcome, RunError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
    let report = pool.install(|| run_experiment(m));
    let manifest_toml = m.to_toml();
    let status = if report.error.is_some() {
        Status::Aborted
    } else if report.gates.iter().all(|g| g.passed) {
        Status::Passed
    } else {
        Status::GateFailed
    };
    let mut summary = Summary {
        experiment: m.experiment.name().to_string(),
        manifest_sha256: digest(&manifest_toml),
        status,
        partial: report.error.is_some(),
        error: report.error,
        gates: report.gates,
        artifacts: Vec::new(),
    };
    let artifacts = write_artifacts(&m.outputs.dir, &manifest_toml, &report.tables, &mut summary)?;
    Ok(Outcome { summary, artifacts })
}

pub fn run_experiment(m: &RunManifest) -> Report {
    let g = match build_datum(m) {
        Ok(g) => g,
        Err(e) => return Report::default().abort(e),
    };
    match m.experiment {
        Experiment::Evolve => run_evolve(m, &g),
        Experiment::Quantize => run_quantize(m, &g),
        Experiment::Dichotomy => run_dichotomy(m, &g),
        Experiment::Smoothing => run_smoothing(m, &g),
        Experiment::LemmaScan => run_lemma_scan(m),
        Experiment::PicardCheck => run_picard(m, &g),
    }
}

/// Synthesizes the manifest's datum on its grid.
pub fn build_datum(m: &RunManifest) -> Result<FourierField, String> {
    let grid = m.grid_spec();
    match &m.datum {
        DatumSpec::Step {
            breakpoints,
            values,
            amplitude,
        } => {
            let spec = StepDataSpec::real(breakpoints.clone(), values.clone()).map_err(|e| e.to_string())?;
            Ok(synthesize_step(&spec.scaled(*amplitude), grid))
        }
        DatumSpec::Modes { modes, amplitude } => {
            let mut g = FourierField::zeros(grid);
            for &(k, re, im) in modes {
                if grid.index(k).is_none() {
                    return Err(format!("datum mode {k} does not fit on {} modes", grid.n_modes()));
                }
                g.set(k, Complex64::new(re, im) * *amplitude);
            }
            Ok(g)
        }
        DatumSpec::Random { k_max, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
            Ok(FourierField::from_fn(grid, |k| {
                if k.abs() > *k_max {
                    return Complex64::new(0.0, 0.0);
                }
                let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                c * (*amplitude / (1.0 + (k * k) as f64))
            }))
        }
    }
}

fn run_evolve(m: &RunManifest, g: &FourierField) -> Report {
    let mut report = Report::default();
    let seconds: Vec<f64> = m.times.iter().map(|t| t.seconds()).collect();
    let cfg = m.solver.config(seconds);
    let (result, error) = match evolve(g, &cfg) {
        Ok(r) => (r, None),
        Err(SolverError::Blowup { step, t, partial }) => {
            let msg = format!("solution blew up at step {step} (t = {t})");
            (partial, Some(msg))
        }
        Err(e) => return report.abort(e),
    };

    let mut snapshots = Table::new("snapshots", &["time", "t", "j", "x", "re", "im"]);
    for (time, (t, u)) in m.times.iter().zip(&result.snapshots) {
        let s = physical(u);
        let grid = u.grid();
        for (j, z) in s.samples().iter().enumerate() {
            snapshots.push(vec![time.label().into(), (*t).into(), j.into(), grid.x(j).into(), z.re.into(), z.im.into()]);
        }
    }
    let log = &result.conservation_log;
    let stride = (log.len() / 1000).max(1);
    let mut conservation = Table::new("conservation", &["step", "t", "mass", "energy"]);
    for (i, s) in log.iter().enumerate() {
        if i % stride == 0 || i + 1 == log.len() {
            let energy = s.energy.map(Cell::from).unwrap_or(Cell::Text(String::new()));
            conservation.push(vec![s.step.into(), s.t.into(), s.mass.into(), energy]);
        }
    }
    report.tables = vec![snapshots, conservation];
    if let Some(msg) = error {
        return report.abort(msg);
    }
    report
        .gates
        .push(Gate::at_least("snapshots_written", result.snapshots.len() as f64, m.times.len() as f64));
    if m.solver.dealias == talbot_core::nls::Dealias::None {
        report.gates.push(Gate::at_most("mass_drift", result.mass_drift(), 1e-8));
    }
    report
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn run_quantize(m: &RunManifest, g: &FourierField) -> Report {
    let section = m.quantize.clone().unwrap_or_default();
    let times: Vec<RationalTime> = section
        .q
        .iter()
        .flat_map(|&q| (0..q).filter(move |&p| gcd(p, q) == 1).map(move |p| (p, q)))
        .map(|(p, q)| RationalTime::new(p as i64, q as i64).expect("positive denominator"))
        .collect();
    let results: Vec<(RationalTime, f64)> = times
        .par_iter()
        .map(|&rt| {
            let d = quantized_evolution(g, rt)
                .relative_l2_distance(&propagate_rational(g, rt))
                .unwrap_or(f64::NAN);
            (rt, d)
        })
        .collect();

    let mut coefficients = Table::new("quantize_coefficients", &["q", "p", "m", "re", "im"]);
    let mut discrepancy = Table::new("quantize_discrepancy", &["q", "p", "relative_l2"]);
    for (rt, d) in &results {
        for (q, p, mm, re, im) in quantization_coefficients(*rt).rows() {
            coefficients.push(vec![q.into(), p.into(), mm.into(), re.into(), im.into()]);
        }
        discrepancy.push(vec![rt.q().into(), rt.p().into(), (*d).into()]);
    }
    let worst = results
        .iter()
        .map(|(_, d)| *d)
        .fold(0.0, |a: f64, d| if d.is_nan() { d } else { a.max(d) });
    Report {
        tables: vec![coefficients, discrepancy],
        gates: vec![Gate::at_most("max_discrepancy", worst, section.tolerance)],
        error: None,
    }
}

fn run_dichotomy(m: &RunManifest, g: &FourierField) -> Report {
    let mut report = Report::default();
    let section = m.dichotomy.clone().expect("resolved");
    let flow = match section.flow {
        FlowKind::Linear => Flow::Linear,
        FlowKind::Nonlinear => Flow::Nonlinear {
            dt: m.solver.dt,
            dealias: m.solver.dealias,
        },
    };
    let rows = match dichotomy_scan(g, &m.times, &section.resolutions, flow, section.aspect) {
        Ok(rows) => rows,
        Err(e) => return report.abort(e),
    };
    let finest = *section.resolutions.last().expect("nonempty");
    let initial = talbot_core::fractal::max_increment(&g.resampled(GridSpec::new(finest).expect("validated")));

    let mut increments = Table::new("dichotomy_increments", &["time", "t", "rational", "n_modes", "max_increment"]);
    let mut dimensions = Table::new(
        "dichotomy_dimension",
        &["time", "t", "component", "dimension", "r_squared", "eps_lo", "eps_hi"],
    );
    let mut counts = Table::new("box_counts", &["time", "component", "eps", "count"]);
    for row in &rows {
        for &(n, inc) in &row.increments {
            increments.push(vec![row.label.clone().into(), row.t.into(), row.rational.into(), n.into(), inc.into()]);
        }
        if let Some(FieldDimension { re, im }) = &row.dimension {
            for (name, est) in [("re", re), ("im", im)] {
                let Some(est) = est else { continue };
                dimensions.push(vec![
                    row.label.clone().into(),
                    row.t.into(),
                    name.into(),
                    est.dimension.into(),
                    est.r_squared.into(),
                    est.eps_range.0.into(),
                    est.eps_range.1.into(),
                ]);
                for &(eps, c) in &est.counts {
                    counts.push(vec![row.label.clone().into(), name.into(), eps.into(), c.into()]);
                }
            }
        }
        if section.resolutions.len() < 2 || row.t == 0.0 {
            continue;
        }
        if row.rational {
            let last = row.increments.last().expect("nonempty").1;
            let change = (last / initial - 1.0).abs();
            report
                .gates
                .push(Gate::at_most(format!("jump_persists[{}]", row.label), change, section.rational_tolerance));
        } else {
            report.gates.push(Gate::at_least(
                format!("increment_decay[{}]", row.label),
                row.refinement_ratio,
                section.min_irrational_decay,
            ));
        }
    }
    report.tables = vec![increments, dimensions, counts];
    report
}

fn run_smoothing(m: &RunManifest, g: &FourierField) -> Report {
    let mut report = Report::default();
    let section = m.smoothing.clone().unwrap_or_default();
    let grid = g.grid();
    let window = section.window.unwrap_or_else(|| tail_window(grid));
    let dt = m.solver.dt.min(resonance_free_dt(grid, m.solver.dealias));
    let mut fits = Table::new(
        "smoothing",
        &["time", "t", "dt", "linear_sigma", "remainder_sigma", "gain", "k_lo", "k_hi"],
    );
    let mut spectrum = Table::new("smoothing_spectrum", &["time", "k", "linear_abs", "remainder_abs"]);
    let linear = match fit_decay(g, window.0, window.1) {
        Ok(r) => r.decay.exponent(),
        Err(e) => return report.abort(e),
    };
    for time in &m.times {
        let t = time.seconds();
        let mut cfg = m.solver.config(vec![t]);
        cfg.dt = dt;
        let n = match nonlinear_remainder(g, t, &cfg) {
            Ok(n) => n,
            Err(e) => {
                report.tables = vec![fits, spectrum];
                return report.abort(e);
            }
        };
        let remainder = match fit_decay(&n, window.0, window.1) {
            Ok(r) => r.decay.exponent(),
            Err(e) => {
                report.tables = vec![fits, spectrum];
                return report.abort(e);
            }
        };
        let gain = remainder - linear;
        fits.push(vec![
            time.label().into(),
            t.into(),
            dt.into(),
            linear.into(),
            remainder.into(),
            gain.into(),
            window.0.into(),
            window.1.into(),
        ]);
        for k in 1..=grid.max_mode() {
            let lin = (g.coeff(k).norm() + g.coeff(-k).norm()) / 2.0;
            let rem = (n.coeff(k).norm() + n.coeff(-k).norm()) / 2.0;
            spectrum.push(vec![time.label().into(), k.into(), lin.into(), rem.into()]);
        }
        report
            .gates
            .push(Gate::at_least(format!("smoothing_gain[{}]", time.label()), gain, section.min_gain));
    }
    report.tables = vec![fits, spectrum];
    report
}

fn run_lemma_scan(m: &RunManifest) -> Report {
    let mut report = Report::default();
    let section = m.lemma_scan.clone().expect("resolved");
    let k = section.k_range;
    let scans: Result<Vec<_>, _> = section
        .params
        .par_iter()
        .map(|&(b, g)| Ok::<_, talbot_core::verification::ScanError>((lemma1_ratio_scan(b, g, k)?, lemma1_ratio_scan(b, g, 2 * k)?)))
        .collect();
    let scans = match scans {
        Ok(s) => s,
        Err(e) => return report.abort(e),
    };
    let mut table = Table::new(
        "lemma_scan",
        &["beta", "gamma", "k_range", "sup_ratio", "argmax_k1", "argmax_k2", "tail_bound", "ratio_tail_bound"],
    );
    for (small, large) in &scans {
        for r in [small, large] {
            table.push(vec![
                r.beta.into(),
                r.gamma.into(),
                r.k_range.into(),
                r.sup_ratio.into(),
                r.argmax.0.into(),
                r.argmax.1.into(),
                r.tail_bound.into(),
                r.ratio_tail_bound.into(),
            ]);
        }
        let change = (large.sup_ratio / small.sup_ratio - 1.0).abs();
        report.gates.push(Gate::at_most(
            format!("sup_ratio_stable[{},{}]", small.beta, small.gamma),
            change,
            section.tolerance,
        ));
    }
    report.tables = vec![table];
    report
}

fn run_picard(m: &RunManifest, g: &FourierField) -> Report {
    let mut report = Report::default();
    let section = m.picard.clone().expect("resolved");
    let mut table = Table::new("picard", &["time", "t", "amplitude", "relative_deviation", "ratio_to_previous"]);
    for time in &m.times {
        let t = time.seconds();
        let cfg = m.solver.config(vec![t]);
        let deviations: Result<Vec<f64>, String> = section
            .amplitudes
            .par_iter()
            .map(|&eps| {
                let ge = g.scaled(Complex64::new(eps, 0.0));
                let n = nonlinear_remainder(&ge, t, &cfg).map_err(|e| e.to_string())?;
                let p = picard_iterate(&ge, t, section.terms).map_err(|e| e.to_string())?;
                n.relative_l2_distance(&p.field).map_err(|e| e.to_string())
            })
            .collect();
        let deviations = match deviations {
            Ok(d) => d,
            Err(e) => {
                report.tables = vec![table];
                return report.abort(e);
            }
        };
        for (i, (&eps, &d)) in section.amplitudes.iter().zip(&deviations).enumerate() {
            let ratio = if i == 0 { Cell::Text(String::new()) } else { (d / deviations[i - 1]).into() };
            table.push(vec![time.label().into(), t.into(), eps.into(), d.into(), ratio]);
            if i > 0 {
                report.gates.push(Gate::at_most(
                    format!("picard_order[{}][{eps}]", time.label()),
                    d / deviations[i - 1],
                    section.max_ratio,
                ));
            }
        }
    }
    report.tables = vec![table];
    report
}
