//! Screen patterns: sum identities, sampling, and the ball model on the screen.

use eraser_core::analysis::{ks_test, ks_uniform};
use eraser_core::harness::{
    catalog, match_coincidences_with_delay, run_screen_experiment, tag_screen_hits, DetectorModel, Experiment,
};
use eraser_core::models::ModelKind;
use eraser_core::quantum::SideOutcome;
use eraser_core::sampling::stream_rng;
use eraser_core::screen::{
    conditioned_pattern, fitted_visibility, joint_density, sample_screen_position, Condition, ScreenGrid,
    ScreenPattern, SlitGeometry,
};
use proptest::prelude::*;

fn arb_geometry() -> impl Strategy<Value = SlitGeometry> {
    (10e-6f64..60e-6, 2.0f64..8.0, 400e-9f64..1000e-9, 0.5f64..2.0).prop_map(|(a, ratio, lambda, l)| SlitGeometry {
        slit_width: a,
        slit_separation: a * ratio,
        wavelength: lambda,
        screen_distance: l,
        envelope_shift: 0.0,
    })
}

proptest! {
    #[test]
    fn conditioned_densities_add_up(g in arb_geometry(), u in -1.0f64..1.0) {
        let x = u * 3.0 * g.envelope_zero();
        let none = joint_density(&g, Condition::NoCondition, x);
        let eraser = joint_density(&g, Condition::OnD3, x) + joint_density(&g, Condition::OnD4, x);
        let which = joint_density(&g, Condition::OnD1, x) + joint_density(&g, Condition::OnD2, x);
        prop_assert!((eraser - none).abs() <= 1e-12 * none.max(1.0));
        prop_assert!((which - none).abs() <= 1e-12 * none.max(1.0));
    }

    #[test]
    fn dark_port_vanishes_at_center(g in arb_geometry()) {
        prop_assert!(joint_density(&g, Condition::OnD4, 0.0).abs() < 1e-12);
    }
}

#[test]
fn patterns_are_normalized() {
    let g = SlitGeometry::default();
    for c in [Condition::OnD1, Condition::OnD2, Condition::OnD3, Condition::OnD4, Condition::NoCondition] {
        let p = conditioned_pattern(&g, c).unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-12, "{c}");
    }
}

#[test]
fn flat_pattern_samples_uniformly() {
    let grid = ScreenGrid {
        half_width: 1.0,
        bins: 2049,
    };
    let xs = grid.centers();
    let p = ScreenPattern::new(xs.clone(), vec![1.0; xs.len()], grid.bin_width()).unwrap();
    let mut rng = stream_rng(1, 0);
    let samples: Vec<f64> = (0..10_000)
        .map(|_| (sample_screen_position(&p, &mut rng).unwrap() + 1.0) / 2.0)
        .collect();
    assert!(ks_uniform(&samples).p_value > 0.01);
}

#[test]
fn sampled_positions_follow_fringe_pattern() {
    let g = SlitGeometry::default();
    let p = conditioned_pattern(&g, Condition::OnD3).unwrap();
    let mut cdf = Vec::with_capacity(p.xs.len());
    let mut acc = 0.0;
    for v in &p.intensity {
        acc += v * p.bin_width;
        cdf.push(acc);
    }
    let mut rng = stream_rng(2, 0);
    let samples: Vec<f64> = (0..20_000).map(|_| sample_screen_position(&p, &mut rng).unwrap()).collect();
    // samples sit on bin centres; compare against the CDF midway through each bin
    let r = ks_test(&samples, |x| {
        let i = p.xs.partition_point(|c| *c < x).min(p.xs.len() - 1);
        cdf[i] - 0.5 * p.intensity[i] * p.bin_width
    });
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn ball_model_screen_matches_quantum_statistics() {
    let g = SlitGeometry::default();
    let window = g.envelope_zero();
    let cfg = catalog(Experiment::E6).with_pairs(100_000).with_seed(11);
    for model in [ModelKind::LocalRealistBall, ModelKind::QuantumMechanics] {
        let run = run_screen_experiment(&cfg, model, &g, &DetectorModel::ideal()).unwrap();
        let v3 = fitted_visibility(&run.positions(Some(SideOutcome::E3)), &g, window).unwrap();
        let v4 = fitted_visibility(&run.positions(Some(SideOutcome::E4)), &g, window).unwrap();
        let pooled = fitted_visibility(&run.positions(None), &g, window).unwrap();
        assert!(v3 >= 0.95 && v4 >= 0.95, "{model}: {v3} {v4}");
        assert!(pooled < 0.05, "{model}: {pooled}");
    }
}

#[test]
fn which_way_partner_kills_fringes() {
    let g = SlitGeometry::default();
    let mut cfg = catalog(Experiment::E6).with_pairs(100_000).with_seed(13);
    cfg.lower_basis = eraser_core::quantum::Basis::WhichWay;
    let det = DetectorModel::ideal();
    let run = run_screen_experiment(&cfg, ModelKind::QuantumMechanics, &g, &det).unwrap();
    let m = match_coincidences_with_delay(&run.clicks, det.coincidence_window, det.lower_delay);
    let tagged = tag_screen_hits(&m.coincidences, cfg.lower_basis);
    let p1: Vec<f64> = tagged.iter().filter(|t| t.1 == SideOutcome::P1).map(|t| t.0).collect();
    assert!(p1.len() > 45_000);
    assert!(fitted_visibility(&p1, &g, g.envelope_zero()).unwrap() < 0.05);
}
