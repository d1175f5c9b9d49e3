use talbot_core::fractal::{dichotomy_scan, field_dimension, Aspect, Flow};
use talbot_core::initial_data::{certify_sobolev_class, synthesize_step, StepDataSpec};
use talbot_core::nls::{evolve, remainder_from, resonant_coefficient, Dealias, SolverConfig};
use talbot_core::quantization::{quantization_coefficients, quantized_evolution};
use talbot_core::spectral::{propagate_rational, sobolev_norm};
use talbot_core::verification::{picard_iterate, PicardTerms};
use talbot_core::{Complex64, Error, FourierField, GridSpec, IrrationalPreset, RationalTime, TaggedTime};

fn grid(n: usize) -> GridSpec {
    GridSpec::new(n).unwrap()
}

#[test]
fn step_datum_is_certified_below_half_a_derivative() {
    let g = synthesize_step(&StepDataSpec::half_indicator(), grid(4096));
    let report = certify_sobolev_class(&g).unwrap();
    assert!((report.decay.exponent() - 1.0).abs() < 0.02);
    assert!((report.critical_sobolev() - 0.5).abs() < 0.02);
    assert!(sobolev_norm(&g, 0.4).is_finite());
}

#[test]
fn rational_revival_of_a_two_plateau_datum() {
    let spec = StepDataSpec::real(vec![0.0, 1.0, 4.0], vec![2.0, -1.0, 0.5]).unwrap();
    let g = synthesize_step(&spec, grid(2048));
    for (p, q) in [(1, 4), (2, 5), (5, 8)] {
        let r = RationalTime::new(p, q).unwrap();
        let combo = quantization_coefficients(r);
        assert!((combo.energy() - 1.0).abs() < 1e-12);
        let d = quantized_evolution(&g, r)
            .relative_l2_distance(&propagate_rational(&g, r))
            .unwrap();
        assert!(d < 1e-12, "{p}/{q}: {d}");
    }
}

#[test]
fn weak_solution_remainder_tracks_the_picard_iterate() {
    let g = synthesize_step(&StepDataSpec::half_indicator(), grid(128)).scaled(Complex64::new(0.01, 0.0));
    let t = 0.3;
    let run = evolve(&g, &SolverConfig::new(1e-4, Dealias::ZeroPadding2x, vec![t])).unwrap();
    let n = remainder_from(&g, run.snapshot(t).unwrap(), t);
    let p = picard_iterate(&g, t, PicardTerms::Full).unwrap();
    assert!(n.relative_l2_distance(&p.field).unwrap() < 1e-2);
    assert!(resonant_coefficient(&g) > 0.0);
}

#[test]
fn linear_scan_separates_rational_from_irrational_times() {
    let g = synthesize_step(&StepDataSpec::half_indicator(), grid(8192));
    let times = [
        TaggedTime::Rational(RationalTime::new(1, 3).unwrap()),
        TaggedTime::Preset(IrrationalPreset::Golden),
    ];
    let rows = dichotomy_scan(&g, &times, &[1024, 8192], Flow::Linear, Aspect::Square).unwrap();
    assert!(rows[0].refinement_ratio < 1.1, "{:?}", rows[0].increments);
    assert!(rows[1].refinement_ratio > 2.0, "{:?}", rows[1].increments);
    let rational = rows[0].dimension.as_ref().unwrap().max().unwrap().1.dimension;
    let irrational = rows[1].dimension.as_ref().unwrap().max().unwrap().1.dimension;
    assert!(irrational > rational + 0.2, "{rational} vs {irrational}");
}

#[test]
fn errors_cross_module_boundaries() {
    let g = FourierField::zeros(grid(64));
    let err = dichotomy_scan(&g, &[TaggedTime::Real(1.0)], &[128], Flow::Linear, Aspect::Square).unwrap_err();
    assert!(matches!(err, Error::Analysis(_)), "{err}");
    assert!(matches!(field_dimension(&g, Aspect::Raw), Err(talbot_core::fractal::AnalysisError::TooFewSamples { .. })
        | Err(talbot_core::fractal::AnalysisError::FlatGraph)));
    let err = dichotomy_scan(&g, &[TaggedTime::Real(1.0)], &[64], Flow::Nonlinear { dt: 1.0, dealias: Dealias::None }, Aspect::Square)
        .unwrap_err();
    assert!(matches!(err, Error::Solver(_)), "{err}");
}
