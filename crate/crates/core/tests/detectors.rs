//! Detector noise, timing and coincidence matching.

use eraser_core::analysis::{build_table, ks_uniform, true_coincidences};
use eraser_core::harness::{
    accidental_rate, active_detectors, catalog, match_coincidences_with_delay, run_experiment, run_experiment_with,
    ClickRecord, DetectorId, DetectorModel, DetectorPreset, Execution, Experiment,
};
use eraser_core::io::{quantize_clicks, write_clicks, write_outcomes};
use eraser_core::models::ModelKind;
use eraser_core::quantum::Side;
use proptest::prelude::*;

fn dark_only(rate: f64) -> DetectorModel {
    DetectorModel {
        efficiency: 0.0,
        dark_rate: rate,
        ..DetectorModel::ideal()
    }
}

#[test]
fn dark_counts_are_poissonian_per_detector() {
    let cfg = catalog(Experiment::E5).with_pairs(1_000_000).with_seed(3);
    let det = dark_only(50.0);
    let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &det).unwrap();
    let duration = 1_000_000.0 / det.pair_rate;
    let mean = det.dark_rate * duration;
    for d in active_detectors(&cfg) {
        let n = out.clicks.iter().filter(|c| c.detector == d).count() as f64;
        assert!((n - mean).abs() <= 3.0 * mean.sqrt(), "{d}: {n} vs {mean}");
    }
    let times: Vec<f64> = out.clicks.iter().map(|c| c.timestamp / duration).collect();
    assert!(ks_uniform(&times).p_value > 0.01);
    assert!(out.clicks.iter().all(|c| c.pair_id.is_none()));
}

#[test]
fn accidental_coincidences_follow_rate_formula() {
    let cfg = catalog(Experiment::E2).with_pairs(1_000_000).with_seed(4);
    let det = DetectorModel {
        coincidence_window: 1e-6,
        lower_delay: 0.0,
        ..dark_only(1_000.0)
    };
    let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &det).unwrap();
    let duration = 1_000_000.0 / det.pair_rate;
    let m = match_coincidences_with_delay(&out.clicks, det.coincidence_window, det.lower_delay);
    // two armed detectors per side
    let expected = accidental_rate(det.coincidence_window, 2.0 * det.dark_rate, 2.0 * det.dark_rate) * duration;
    let seen = m.accidentals() as f64;
    assert_eq!(m.accidentals(), m.coincidences.len());
    assert!((seen - expected).abs() <= 3.0 * expected.sqrt(), "{seen} vs {expected}");
}

#[test]
fn wide_window_recovers_every_pair() {
    let det = DetectorModel {
        jitter_sigma: 100e-9,
        coincidence_window: 1e-6,
        ..DetectorModel::ideal()
    };
    assert!(det.coincidence_window > 6.0 * det.jitter_sigma * std::f64::consts::SQRT_2);
    let cfg = catalog(Experiment::E4).with_pairs(20_000).with_seed(5);
    let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &det).unwrap();
    let m = match_coincidences_with_delay(&out.clicks, det.coincidence_window, det.lower_delay);
    assert_eq!(m.coincidences.len(), 20_000);
    assert_eq!(m.accidentals(), 0);
    assert_eq!(m.singles(), 0);
    let table = build_table(&m.coincidences, cfg.lower_basis);
    assert_eq!(table, eraser_core::analysis::JointTable::from_raw(&out.raw));
}

#[test]
fn efficiency_scales_coincidences_quadratically() {
    let det = DetectorModel {
        efficiency: 0.5,
        ..DetectorModel::ideal()
    };
    let n = 100_000u64;
    let cfg = catalog(Experiment::E2).with_pairs(n).with_seed(6);
    let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &det).unwrap();
    let m = match_coincidences_with_delay(&out.clicks, det.coincidence_window, det.lower_delay);
    let c = m.coincidences.len() as f64;
    let p = 0.25;
    assert!((c - n as f64 * p).abs() <= 3.0 * (n as f64 * p * (1.0 - p)).sqrt());
    assert_eq!(true_coincidences(&m.coincidences).len(), m.coincidences.len());
}

fn serialized(exec: Execution) -> (Vec<u8>, Vec<u8>) {
    let cfg = catalog(Experiment::E5).with_pairs(5_000).with_seed(12);
    let mut out = run_experiment_with(&cfg, ModelKind::Superdeterministic, &DetectorPreset::Mkid.model(), exec).unwrap();
    quantize_clicks(&mut out.clicks);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_clicks(&mut a, &out.clicks).unwrap();
    write_outcomes(&mut b, &out.raw).unwrap();
    (a, b)
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let reference = serialized(Execution::Sequential);
    assert_eq!(serialized(Execution::Threads(4)), reference);
    assert_eq!(serialized(Execution::Parallel), reference);
}

#[test]
fn different_seeds_differ() {
    let run = |seed| {
        run_experiment(&catalog(Experiment::E2).with_pairs(200).with_seed(seed), ModelKind::QuantumMechanics, &DetectorModel::ideal())
            .unwrap()
            .raw
    };
    assert_ne!(run(1), run(2));
}

fn arb_clicks() -> impl Strategy<Value = Vec<ClickRecord>> {
    let det = prop::sample::select(vec![DetectorId::U3, DetectorId::U4, DetectorId::D3, DetectorId::D4, DetectorId::D1]);
    prop::collection::vec((det, 0.0f64..100.0), 0..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (d, t))| ClickRecord {
                detector: d,
                timestamp: t,
                pair_id: Some(i as u64),
                screen_x: None,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn matching_invariants(clicks in arb_clicks(), window in 0.01f64..5.0, delay in 0.0f64..3.0) {
        let m = match_coincidences_with_delay(&clicks, window, delay);
        prop_assert_eq!(2 * m.coincidences.len() + m.singles(), clicks.len());
        for c in &m.coincidences {
            prop_assert!(c.dt.abs() <= window);
            prop_assert_eq!(c.upper.detector.side(), Side::Upper);
            prop_assert_eq!(c.lower.detector.side(), Side::Lower);
        }
        let mut ids: Vec<u64> = m.coincidences.iter().flat_map(|c| [c.upper.pair_id, c.lower.pair_id]).flatten().collect();
        let len = ids.len();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), len);
        // an unmatched upper click has no free lower partner in its window
        for u in &m.unmatched_upper {
            for l in &m.unmatched_lower {
                prop_assert!((l.timestamp - delay - u.timestamp).abs() > window);
            }
        }
    }
}
