use serde::{Deserialize, Serialize};

use crate::quantum::Side;

use super::run::sort_clicks;
use super::ClickRecord;

/// An upper click paired with a lower click. `dt` is the lower time minus
/// the upper time minus the expected lower delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub upper: ClickRecord,
    pub lower: ClickRecord,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// In upper-click time order.
    pub coincidences: Vec<CoincidenceRecord>,
    pub unmatched_upper: Vec<ClickRecord>,
    pub unmatched_lower: Vec<ClickRecord>,
}

impl MatchResult {
    pub fn singles(&self) -> usize {
        self.unmatched_upper.len() + self.unmatched_lower.len()
    }

    /// Coincidences whose clicks are not from the same emitted pair
    /// (including every coincidence involving a dark count).
    pub fn accidentals(&self) -> usize {
        self.coincidences
            .iter()
            .filter(|c| c.upper.pair_id.is_none() || c.upper.pair_id != c.lower.pair_id)
            .count()
    }
}

/// Expected accidental coincidence rate for independent Poissonian singles.
pub fn accidental_rate(window: f64, upper_singles_rate: f64, lower_singles_rate: f64) -> f64 {
    2.0 * window * upper_singles_rate * lower_singles_rate
}

pub fn match_coincidences(clicks: &[ClickRecord], window: f64) -> MatchResult {
    match_coincidences_with_delay(clicks, window, 0.0)
}

/// Greedy nearest-neighbour matching. Upper clicks are taken in time order;
/// each takes the closest still-unused lower click with
/// `|t_lower − delay − t_upper| ≤ window` (earlier click on ties).
pub fn match_coincidences_with_delay(clicks: &[ClickRecord], window: f64, delay: f64) -> MatchResult {
    let mut sorted = clicks.to_vec();
    sort_clicks(&mut sorted);
    let (upper, lower): (Vec<ClickRecord>, Vec<ClickRecord>) =
        sorted.into_iter().partition(|c| c.detector.side() == Side::Upper);

    let mut used = vec![false; lower.len()];
    let mut start = 0;
    let mut result = MatchResult::default();
    for u in upper {
        while start < lower.len() && lower[start].timestamp - delay < u.timestamp - window {
            start += 1;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, l) in lower.iter().enumerate().skip(start) {
            let dt = l.timestamp - delay - u.timestamp;
            if dt > window {
                break;
            }
            if used[j] || dt.abs() > window {
                continue;
            }
            if best.is_none_or(|(_, b)| dt.abs() < b.abs()) {
                best = Some((j, dt));
            }
        }
        match best {
            Some((j, dt)) => {
                used[j] = true;
                result.coincidences.push(CoincidenceRecord {
                    upper: u,
                    lower: lower[j],
                    dt,
                });
            }
            None => result.unmatched_upper.push(u),
        }
    }
    result.unmatched_lower = lower
        .into_iter()
        .zip(used)
        .filter(|(_, u)| !u)
        .map(|(c, _)| c)
        .collect();
    result
}
