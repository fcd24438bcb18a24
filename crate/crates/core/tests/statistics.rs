//! Hypothesis tests and the power sweep.

use eraser_core::analysis::{
    chi_square_test, pairs_to_significance, power_sweep, sequence_test, summarize_trials, sweep_trials, JointTable,
    ModelPair, PairsNeeded, SweepOptions, SweepPoint, Verdict,
};
use eraser_core::harness::{catalog, DetectorModel, Experiment};
use eraser_core::models::{declared_distribution, ModelKind, RetroPolicy};
use eraser_core::quantum::SideOutcome::{self, *};
use proptest::prelude::*;

const STRICT: ModelKind = ModelKind::Retrocausal(RetroPolicy::Strict);

proptest! {
    #[test]
    fn significance_count_is_minimal(alpha in 1e-12f64..0.99) {
        let n = pairs_to_significance(alpha).unwrap() as i32;
        prop_assert!(0.5f64.powi(n) <= alpha);
        prop_assert!(n == 1 || 0.5f64.powi(n - 1) > alpha);
    }

    #[test]
    fn sequence_p_value_is_half_power(n in 0usize..60, tail in prop::option::of(Just((E4, E4)))) {
        let mut seq = vec![(E3, E3); n];
        seq.extend(tail);
        let r = sequence_test(&seq, 1e-6);
        prop_assert_eq!(r.p_value, 0.5f64.powi(n as i32));
        if tail.is_some() {
            prop_assert_eq!(r.verdict, Verdict::FavorsQM);
            prop_assert_eq!(r.log_likelihood_ratio, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn p_values_are_probabilities(counts in prop::collection::vec(0u64..500, 4)) {
        let cells = [(E3, E3), (E3, E4), (E4, E3), (E4, E4)];
        let mut t = JointTable::new();
        for (k, c) in cells.iter().zip(&counts) {
            for _ in 0..*c {
                t.add(k.0, k.1);
            }
        }
        let pred = declared_distribution(ModelKind::QuantumMechanics, &catalog(Experiment::E4))
            .unwrap()
            .conditioned(|_, l| l != D1Click)
            .unwrap();
        if let Ok(r) = chi_square_test(&t, &pred, 0.01) {
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert!(r.statistic >= 0.0);
            prop_assert!(r.log_likelihood_ratio <= 1e-9);
        }
    }
}

#[test]
fn strict_data_reach_significance_at_twenty_pairs() {
    let seq: Vec<(SideOutcome, SideOutcome)> = vec![(E3, E3); 25];
    let first_significant = (1..=seq.len()).find(|&k| sequence_test(&seq[..k], 1e-6).verdict == Verdict::FavorsRival);
    assert_eq!(first_significant, Some(20));
}

#[test]
fn sweep_for_strict_model_scales_with_efficiency() {
    let pair = ModelPair {
        truth: ModelKind::QuantumMechanics,
        rival: STRICT,
    };
    let cfg = catalog(Experiment::E5);
    let options = SweepOptions {
        trials: 4_000,
        max_pairs: 400,
        seed: 5,
        ..Default::default()
    };
    let grid = [
        SweepPoint {
            efficiency: 1.0,
            dark_rate: 0.0,
        },
        SweepPoint {
            efficiency: 0.5,
            dark_rate: 0.0,
        },
    ];
    let mean = |p: SweepPoint, i: u64| {
        let s = sweep_trials(pair, &cfg, p, 1e-6, &options, i).unwrap();
        assert!(s.iter().all(|x| x.is_some()));
        s.iter().map(|x| x.unwrap() as f64).sum::<f64>() / s.len() as f64
    };
    let ideal = mean(grid[0], 0);
    let half = mean(grid[1], 1);
    // ideal: geometric(1/2), mean 2, sd √2; η = 0.5: coincidences thin by η², mean 8, sd √56
    let n = options.trials as f64;
    assert!((ideal - 2.0).abs() <= 3.0 * 2f64.sqrt() / n.sqrt(), "{ideal}");
    assert!((half - 8.0).abs() <= 3.0 * 56f64.sqrt() / n.sqrt(), "{half}");
    assert!((half / ideal - 4.0).abs() < 0.4);

    let rows = power_sweep(pair, &cfg, &grid, 1e-6, &options).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.censored == 0 && matches!(r.pairs_needed, PairsNeeded::Reached { .. })));
}

#[test]
fn indistinguishable_models_are_unreachable() {
    let pair = ModelPair {
        truth: ModelKind::QuantumMechanics,
        rival: ModelKind::LocalRealistBall,
    };
    let options = SweepOptions {
        trials: 20,
        max_pairs: 2_000,
        seed: 1,
        base_detector: DetectorModel::ideal(),
        true_coincidences_only: false,
    };
    let rows = power_sweep(
        pair,
        &catalog(Experiment::E2),
        &[SweepPoint {
            efficiency: 1.0,
            dark_rate: 0.0,
        }],
        1e-6,
        &options,
    )
    .unwrap();
    assert_eq!(rows[0].pairs_needed, PairsNeeded::Unreachable);
    assert_eq!(summarize_trials(&[None; 20]), PairsNeeded::Unreachable);
}

#[test]
fn ball_model_rejected_on_hybrid_run() {
    let pair = ModelPair {
        truth: ModelKind::QuantumMechanics,
        rival: ModelKind::LocalRealistBall,
    };
    let options = SweepOptions {
        trials: 50,
        max_pairs: 500,
        seed: 2,
        ..Default::default()
    };
    let s = sweep_trials(
        pair,
        &catalog(Experiment::E4),
        SweepPoint {
            efficiency: 1.0,
            dark_rate: 0.0,
        },
        1e-6,
        &options,
        0,
    )
    .unwrap();
    // (E3, E4) and (E4, E3) are forbidden for the ball model; each pair shows one with probability 1/4
    assert!(s.iter().all(|x| x.is_some()));
    let mean = s.iter().map(|x| x.unwrap() as f64).sum::<f64>() / s.len() as f64;
    assert!(mean < 8.0, "{mean}");
}
