//! Born-rule tables checked against an explicit Kronecker-product matrix
//! computation, plus structural properties over random states.

use eraser_core::quantum::{
    joint_distribution, make_entangled_state, Amplitude, Basis, JointState, MeasurementOrder, Side, SideOutcome,
};
use proptest::prelude::*;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Rows of the measurement matrix for a side, with their outcome labels.
fn rows(basis: Basis) -> Vec<(SideOutcome, [f64; 2])> {
    match basis {
        Basis::WhichWay => vec![(SideOutcome::P1, [1.0, 0.0]), (SideOutcome::P2, [0.0, 1.0])],
        Basis::Eraser => vec![(SideOutcome::E3, [H, H]), (SideOutcome::E4, [H, -H])],
        Basis::HybridD1 => vec![
            (SideOutcome::D1Click, [1.0, 0.0]),
            (SideOutcome::E3, [0.0, H]),
            (SideOutcome::E4, [0.0, -H]),
        ],
    }
}

/// Probability of every cell via `(M_upper ⊗ M_lower) ψ` with ψ flattened as
/// index `2·upper + lower`.
fn kron_oracle(psi: [Amplitude; 4], ub: Basis, lb: Basis) -> Vec<((SideOutcome, SideOutcome), f64)> {
    let (ru, rl) = (rows(ub), rows(lb));
    let mut out = Vec::new();
    for (u, a) in &ru {
        for (l, b) in &rl {
            let mut row = [0.0; 4];
            for i in 0..2 {
                for j in 0..2 {
                    row[2 * i + j] = a[i] * b[j];
                }
            }
            let amp: Amplitude = (0..4).map(|k| psi[k] * row[k]).sum();
            out.push(((*u, *l), amp.norm_sqr()));
        }
    }
    out
}

fn flatten(s: &JointState) -> [Amplitude; 4] {
    let a = s.amplitudes();
    [a[0][0], a[0][1], a[1][0], a[1][1]]
}

const UPPER_BASES: [Basis; 2] = [Basis::WhichWay, Basis::Eraser];
const LOWER_BASES: [Basis; 3] = [Basis::WhichWay, Basis::Eraser, Basis::HybridD1];

#[test]
fn entangled_state_tables_match_matrix_oracle() {
    let s = make_entangled_state();
    for ub in UPPER_BASES {
        for lb in LOWER_BASES {
            let table = joint_distribution(&s, ub, lb).unwrap();
            for (k, p) in kron_oracle(flatten(&s), ub, lb) {
                assert!((table[&k] - p).abs() < 1e-12, "{ub}/{lb} {k:?}");
            }
        }
    }
}

#[test]
fn hybrid_lower_table_values() {
    use SideOutcome::*;
    let t = joint_distribution(&make_entangled_state(), Basis::Eraser, Basis::HybridD1).unwrap();
    for (k, p) in [
        ((E3, D1Click), 0.25),
        ((E4, D1Click), 0.25),
        ((E3, E3), 0.125),
        ((E3, E4), 0.125),
        ((E4, E3), 0.125),
        ((E4, E4), 0.125),
    ] {
        assert!((t[&k] - p).abs() < 1e-12);
    }
}

fn arb_state() -> impl Strategy<Value = JointState> {
    prop::array::uniform8(-1.0f64..1.0)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|v| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = |i: usize| Amplitude::new(v[2 * i] / n, v[2 * i + 1] / n);
            JointState::new([[c(0), c(1)], [c(2), c(3)]]).unwrap()
        })
}

fn arb_bases() -> impl Strategy<Value = (Basis, Basis)> {
    (0..2usize, 0..3usize).prop_map(|(u, l)| (UPPER_BASES[u], LOWER_BASES[l]))
}

/// Exact distribution when one side is measured first, via collapse.
fn sequential_exact(s: &JointState, order: MeasurementOrder, ub: Basis, lb: Basis) -> Vec<((SideOutcome, SideOutcome), f64)> {
    let (first_side, fb, sb) = match order {
        MeasurementOrder::UpperFirst => (Side::Upper, ub, lb),
        MeasurementOrder::LowerFirst => (Side::Lower, lb, ub),
    };
    let mut out = Vec::new();
    for (o1, p1) in s.side_marginal(first_side, fb).unwrap() {
        let Some(partner) = s.collapse(first_side, fb, o1) else {
            continue;
        };
        for (o2, p2) in partner.outcome_probs(sb) {
            let key = match order {
                MeasurementOrder::UpperFirst => (o1, o2),
                MeasurementOrder::LowerFirst => (o2, o1),
            };
            out.push((key, p1 * p2));
        }
    }
    out
}

proptest! {
    #[test]
    fn tables_match_oracle_and_normalize(s in arb_state(), (ub, lb) in arb_bases()) {
        let table = joint_distribution(&s, ub, lb).unwrap();
        let total: f64 = table.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for (k, p) in kron_oracle(flatten(&s), ub, lb) {
            prop_assert!((table[&k] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn eraser_rotation_is_unitary_involution(s in arb_state(), upper in any::<bool>()) {
        let side = if upper { Side::Upper } else { Side::Lower };
        let r = s.eraser_rotate(side);
        prop_assert!((r.norm_sqr() - 1.0).abs() < 1e-12);
        let back = r.eraser_rotate(side);
        for (a, b) in flatten(&back).iter().zip(flatten(&s).iter()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn upper_marginal_ignores_lower_setting(s in arb_state(), ui in 0..2usize) {
        let ub = UPPER_BASES[ui];
        let reference = s.side_marginal(Side::Upper, ub).unwrap();
        for lb in LOWER_BASES {
            let t = joint_distribution(&s, ub, lb).unwrap();
            for (o, p) in &reference {
                let m: f64 = t.iter().filter(|((u, _), _)| u == o).map(|(_, v)| v).sum();
                prop_assert!((m - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn measurement_order_does_not_matter(s in arb_state(), (ub, lb) in arb_bases()) {
        let table = joint_distribution(&s, ub, lb).unwrap();
        for order in [MeasurementOrder::UpperFirst, MeasurementOrder::LowerFirst] {
            let mut seq = std::collections::BTreeMap::new();
            for (k, p) in sequential_exact(&s, order, ub, lb) {
                *seq.entry(k).or_insert(0.0) += p;
            }
            for (k, p) in &table {
                prop_assert!((seq.get(k).copied().unwrap_or(0.0) - p).abs() < 1e-12);
            }
        }
    }
}
