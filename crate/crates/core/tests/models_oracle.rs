//! Declared model tables against independent enumerations, and sampled
//! tables against declared ones.

use std::collections::BTreeMap;

use eraser_core::analysis::JointTable;
use eraser_core::harness::{catalog, run_experiment, DetectorModel, Experiment, MeasurementConfig};
use eraser_core::models::{declared_distribution, ModelError, ModelKind, RetroPolicy};
use eraser_core::quantum::{Basis, SideOutcome};
use eraser_core::harness::HarnessError;

use SideOutcome::*;

type Table = BTreeMap<(SideOutcome, SideOutcome), f64>;

/// Ball model by brute force over (path, port), each with weight 1/4.
fn ball_oracle(upper: Basis, lower: Basis, feedback: bool) -> Table {
    let mut t = Table::new();
    for path in [1, 2] {
        for port in [3, 4] {
            let eraser = |p: u8| if p == 3 { E3 } else { E4 };
            let u = match upper {
                Basis::WhichWay => [P1, P2][path - 1],
                _ => eraser(port),
            };
            let lower = if feedback && u == E4 { Basis::HybridD1 } else { lower };
            let l = match lower {
                Basis::WhichWay => [P1, P2][path - 1],
                Basis::Eraser => eraser(port),
                Basis::HybridD1 if path == 1 => D1Click,
                Basis::HybridD1 => eraser(port),
            };
            *t.entry((u, l)).or_insert(0.0) += 0.25;
        }
    }
    t
}

fn assert_same(kind: ModelKind, e: Experiment, expected: &Table) {
    let got = declared_distribution(kind, &catalog(e)).unwrap();
    for u in SideOutcome::ALL {
        for l in SideOutcome::ALL {
            let want = expected.get(&(u, l)).copied().unwrap_or(0.0);
            assert!((got.prob(u, l) - want).abs() < 1e-12, "{kind} {e} ({u},{l}): {} vs {want}", got.prob(u, l));
        }
    }
}

fn qm_table(e: Experiment) -> Table {
    declared_distribution(ModelKind::QuantumMechanics, &catalog(e)).unwrap().cells
}

const TABLE_EXPERIMENTS: [Experiment; 5] = [Experiment::E1, Experiment::E2, Experiment::E3, Experiment::E4, Experiment::E5];

#[test]
fn ball_model_matches_enumeration() {
    for e in TABLE_EXPERIMENTS {
        let c = catalog(e);
        assert_same(ModelKind::LocalRealistBall, e, &ball_oracle(c.upper_basis, c.lower_basis, c.feedback.is_some()));
    }
}

#[test]
fn ball_model_on_e4_and_e5() {
    let e4: Table = [((E3, D1Click), 0.25), ((E4, D1Click), 0.25), ((E3, E3), 0.25), ((E4, E4), 0.25)].into();
    assert_same(ModelKind::LocalRealistBall, Experiment::E4, &e4);
    let e5: Table = [((E3, E3), 0.5), ((E4, D1Click), 0.25), ((E4, E4), 0.25)].into();
    assert_same(ModelKind::LocalRealistBall, Experiment::E5, &e5);
}

#[test]
fn superdeterministic_reproduces_quantum_tables() {
    for e in TABLE_EXPERIMENTS {
        assert_same(ModelKind::Superdeterministic, e, &qm_table(e));
    }
}

#[test]
fn retrocausal_models_without_feedback_match_quantum() {
    for policy in [RetroPolicy::Strict, RetroPolicy::NovikovUniform] {
        for e in [Experiment::E1, Experiment::E2, Experiment::E3, Experiment::E4] {
            assert_same(ModelKind::Retrocausal(policy), e, &qm_table(e));
        }
    }
}

#[test]
fn retrocausal_policies_on_feedback_run() {
    assert_same(
        ModelKind::Retrocausal(RetroPolicy::Strict),
        Experiment::E5,
        &[((E3, E3), 1.0)].into(),
    );
    assert_same(ModelKind::Retrocausal(RetroPolicy::NovikovUniform), Experiment::E5, &qm_table(Experiment::E5));
}

#[test]
fn every_declared_table_is_normalized() {
    for kind in ModelKind::ALL {
        for e in TABLE_EXPERIMENTS {
            let t = declared_distribution(kind, &catalog(e)).unwrap();
            assert!((t.total() - 1.0).abs() < 1e-12, "{kind} {e}");
            assert!(t.cells.values().all(|p| *p >= 0.0));
        }
    }
}

#[test]
fn screen_configs_have_no_outcome_table() {
    for kind in ModelKind::ALL {
        assert!(declared_distribution(kind, &catalog(Experiment::E6)).is_err());
    }
}

#[test]
fn illegal_upper_hybrid_is_rejected() {
    let cfg = MeasurementConfig::new(Basis::HybridD1, Basis::Eraser).with_pairs(5);
    assert!(declared_distribution(ModelKind::QuantumMechanics, &cfg).is_err());
    assert!(matches!(
        run_experiment(&cfg, ModelKind::QuantumMechanics, &DetectorModel::ideal()),
        Err(HarnessError::InvalidConfig(_)) | Err(HarnessError::Model(ModelError::InvalidConfig(_)))
            | Err(HarnessError::Model(ModelError::Quantum(_)))
    ));
}

#[test]
fn sampled_tables_within_three_sigma() {
    let n = 100_000u64;
    for kind in ModelKind::ALL {
        for (i, e) in TABLE_EXPERIMENTS.into_iter().enumerate() {
            let cfg = catalog(e).with_pairs(n).with_seed(1000 + i as u64);
            let out = run_experiment(&cfg, kind, &DetectorModel::ideal()).unwrap();
            let table = JointTable::from_raw(&out.raw);
            let declared = declared_distribution(kind, &cfg).unwrap();
            for u in SideOutcome::ALL {
                for l in SideOutcome::ALL {
                    let p = declared.prob(u, l);
                    let c = table.count(u, l) as f64;
                    let sd = (n as f64 * p * (1.0 - p)).sqrt();
                    if p == 0.0 {
                        assert_eq!(c, 0.0, "{kind} {e} ({u},{l}) impossible but seen");
                    } else {
                        assert!((c - n as f64 * p).abs() <= 3.0 * sd, "{kind} {e} ({u},{l}): {c} vs {}", n as f64 * p);
                    }
                }
            }
        }
    }
}

#[test]
fn feedback_acts_only_on_detected_trigger_clicks() {
    let det = DetectorModel {
        efficiency: 0.5,
        ..DetectorModel::ideal()
    };
    let cfg = catalog(Experiment::E5).with_pairs(20_000).with_seed(77);
    let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &det).unwrap();
    let detected_upper: std::collections::HashSet<u64> = out
        .clicks
        .iter()
        .filter(|c| c.detector.side() == eraser_core::quantum::Side::Upper)
        .filter_map(|c| c.pair_id)
        .collect();
    let mut switched = 0;
    for r in &out.raw {
        let o = r.outcome;
        if !detected_upper.contains(&r.pair_id) {
            assert_eq!(o.resolved_lower_basis, Basis::Eraser);
            assert_ne!(o.lower, D1Click);
        } else if o.upper == E4 {
            assert_eq!(o.resolved_lower_basis, Basis::HybridD1);
            switched += 1;
        }
    }
    assert!(switched > 0);
}
