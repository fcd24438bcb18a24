use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::harness::{CoincidenceRecord, RawOutcome};
use crate::quantum::{Basis, SideOutcome};

use super::AnalysisError;

/// Counts of `(upper, lower)` outcome pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JointTable {
    pub counts: BTreeMap<(SideOutcome, SideOutcome), u64>,
    pub total: u64,
}

impl JointTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, upper: SideOutcome, lower: SideOutcome) {
        *self.counts.entry((upper, lower)).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn from_pairs<I: IntoIterator<Item = (SideOutcome, SideOutcome)>>(pairs: I) -> Self {
        let mut t = Self::new();
        for (u, l) in pairs {
            t.add(u, l);
        }
        t
    }

    /// Ground-truth table of a run.
    pub fn from_raw(raw: &[RawOutcome]) -> Self {
        Self::from_pairs(raw.iter().map(|r| (r.outcome.upper, r.outcome.lower)))
    }

    pub fn count(&self, upper: SideOutcome, lower: SideOutcome) -> u64 {
        self.counts.get(&(upper, lower)).copied().unwrap_or(0)
    }

    pub fn fraction(&self, upper: SideOutcome, lower: SideOutcome) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(upper, lower) as f64 / self.total as f64
        }
    }

    /// Sub-table of the cells accepted by `keep`.
    pub fn filter<F: Fn(SideOutcome, SideOutcome) -> bool>(&self, keep: F) -> JointTable {
        let counts: BTreeMap<_, _> = self
            .counts
            .iter()
            .filter(|(&(u, l), _)| keep(u, l))
            .map(|(&k, &v)| (k, v))
            .collect();
        let total = counts.values().sum();
        JointTable { counts, total }
    }

    pub fn upper_marginal(&self) -> BTreeMap<SideOutcome, u64> {
        let mut m = BTreeMap::new();
        for (&(u, _), &n) in &self.counts {
            *m.entry(u).or_insert(0) += n;
        }
        m
    }
}

/// Tally matched coincidences by the outcome their detectors indicate.
/// Accidentals are counted like any other coincidence; screen clicks carry
/// no outcome and are skipped.
pub fn build_table(coincidences: &[CoincidenceRecord], lower_basis: Basis) -> JointTable {
    JointTable::from_pairs(coincidence_outcomes(coincidences, lower_basis))
}

/// Outcome pairs of the coincidences, in order.
pub fn coincidence_outcomes(
    coincidences: &[CoincidenceRecord],
    lower_basis: Basis,
) -> Vec<(SideOutcome, SideOutcome)> {
    coincidences
        .iter()
        .filter_map(|c| Some((c.upper.detector.outcome(lower_basis)?, c.lower.detector.outcome(lower_basis)?)))
        .collect()
}

/// Coincidences whose two clicks come from the same emitted pair. Uses the
/// simulation's ground truth; meant for validation runs only.
pub fn true_coincidences(coincidences: &[CoincidenceRecord]) -> Vec<CoincidenceRecord> {
    coincidences
        .iter()
        .filter(|c| c.upper.pair_id.is_some() && c.upper.pair_id == c.lower.pair_id)
        .copied()
        .collect()
}

/// Assignment of ±1 values to outcomes on each side. Outcomes without a
/// value are left out of the correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub upper: Vec<(SideOutcome, i8)>,
    pub lower: Vec<(SideOutcome, i8)>,
}

impl Grouping {
    /// E3 → +1, E4 → −1 on both sides.
    pub fn eraser() -> Self {
        let g = vec![(SideOutcome::E3, 1), (SideOutcome::E4, -1)];
        Self {
            upper: g.clone(),
            lower: g,
        }
    }

    /// P1 → +1, P2 → −1 on both sides.
    pub fn which_way() -> Self {
        let g = vec![(SideOutcome::P1, 1), (SideOutcome::P2, -1)];
        Self {
            upper: g.clone(),
            lower: g,
        }
    }

    /// Natural grouping for the given arrangements.
    pub fn for_bases(upper: Basis, lower: Basis) -> Self {
        let side = |b: Basis| match b {
            Basis::WhichWay => vec![(SideOutcome::P1, 1), (SideOutcome::P2, -1)],
            _ => vec![(SideOutcome::E3, 1), (SideOutcome::E4, -1)],
        };
        Self {
            upper: side(upper),
            lower: side(lower),
        }
    }

    fn value(list: &[(SideOutcome, i8)], o: SideOutcome) -> Option<f64> {
        list.iter().find(|(k, _)| *k == o).map(|(_, v)| f64::from(*v))
    }
}

/// Pearson correlation of the two ±1 variables defined by `grouping`, over
/// the table cells both sides assign a value to.
pub fn binary_correlation(table: &JointTable, grouping: &Grouping) -> Result<f64, AnalysisError> {
    let (mut n, mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&(u, l), &count) in &table.counts {
        let (Some(x), Some(y)) = (Grouping::value(&grouping.upper, u), Grouping::value(&grouping.lower, l)) else {
            continue;
        };
        let c = count as f64;
        n += c;
        sx += c * x;
        sy += c * y;
        sxy += c * x * y;
    }
    if n == 0.0 {
        return Err(AnalysisError::DegenerateMarginal);
    }
    let (mx, my) = (sx / n, sy / n);
    let vx = 1.0 - mx * mx;
    let vy = 1.0 - my * my;
    if vx <= 1e-15 || vy <= 1e-15 {
        return Err(AnalysisError::DegenerateMarginal);
    }
    Ok(((sxy / n - mx * my) / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use SideOutcome::*;

    #[test]
    fn empty_input_gives_empty_table() {
        let t = build_table(&[], Basis::Eraser);
        assert_eq!(t.total, 0);
        assert!(t.counts.is_empty());
    }

    #[test]
    fn perfect_and_anti_correlation() {
        let t = JointTable::from_pairs([(E3, E3), (E4, E4), (E3, E3)]);
        assert!((binary_correlation(&t, &Grouping::eraser()).unwrap() - 1.0).abs() < 1e-12);
        let t = JointTable::from_pairs([(E3, E4), (E4, E3)]);
        assert!((binary_correlation(&t, &Grouping::eraser()).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_side_is_degenerate() {
        let t = JointTable::from_pairs([(E3, E3), (E3, E4)]);
        assert_eq!(binary_correlation(&t, &Grouping::eraser()), Err(AnalysisError::DegenerateMarginal));
        let t = JointTable::from_pairs([(E3, D1Click)]);
        assert_eq!(binary_correlation(&t, &Grouping::eraser()), Err(AnalysisError::DegenerateMarginal));
    }

    #[test]
    fn filter_keeps_totals_consistent() {
        let t = JointTable::from_pairs([(E3, E3), (E4, D1Click), (E4, E4), (E4, D1Click)]);
        let f = t.filter(|_, l| l != D1Click);
        assert_eq!(f.total, 2);
        assert_eq!(f.counts.values().sum::<u64>(), f.total);
    }
}
