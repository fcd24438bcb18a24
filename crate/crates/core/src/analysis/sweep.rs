use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harness::{
    match_coincidences_with_delay, run_experiment_with, CoincidenceRecord, DetectorModel, Execution, MeasurementConfig,
};
use crate::models::{declared_distribution, ModelKind, ModelPrediction, RetroPolicy};
use crate::quantum::SideOutcome;
use crate::sampling::derive_seed;

use super::{chi_square_test, coincidence_outcomes, pairs_to_significance, true_coincidences, AnalysisError, JointTable};

/// The model generating the data and the model being tested against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPair {
    pub truth: ModelKind,
    pub rival: ModelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub efficiency: f64,
    pub dark_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub trials: usize,
    /// Pairs emitted per trial; a trial that has not rejected by then is censored.
    pub max_pairs: u64,
    pub seed: u64,
    /// Timing and window settings; efficiency and dark rate come from the grid.
    pub base_detector: DetectorModel,
    /// Drop accidental coincidences using simulation ground truth.
    pub true_coincidences_only: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            max_pairs: 10_000,
            seed: 0,
            base_detector: DetectorModel::ideal(),
            true_coincidences_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PairsNeeded {
    Reached {
        median: f64,
        /// 95% order-statistic interval for the median.
        ci_low: f64,
        /// `None` when the upper order statistic is censored.
        ci_high: Option<f64>,
        /// Only when no trial was censored.
        mean: Option<f64>,
    },
    /// More than half of the trials never rejected.
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub efficiency: f64,
    pub dark_rate: f64,
    pub trials: usize,
    pub censored: usize,
    pub pairs_needed: PairsNeeded,
}

enum Rule {
    /// Feedback runs involving the strict retrocausal model: exact sequence test.
    Sequence { rival_is_qm: bool, needed: usize },
    /// Zero-likelihood check on every coincidence plus chi-square checkpoints.
    ChiSquare { rival: ModelPrediction },
}

fn rule_for(pair: ModelPair, config: &MeasurementConfig, alpha: f64) -> Result<Rule, AnalysisError> {
    let strict = ModelKind::Retrocausal(RetroPolicy::Strict);
    let involves_strict = pair.truth == strict || pair.rival == strict;
    let other_is_qm = pair.truth == ModelKind::QuantumMechanics || pair.rival == ModelKind::QuantumMechanics;
    if config.feedback.is_some() && involves_strict && other_is_qm && pair.truth != pair.rival {
        return Ok(Rule::Sequence {
            rival_is_qm: pair.rival == ModelKind::QuantumMechanics,
            needed: pairs_to_significance(alpha)? as usize,
        });
    }
    Ok(Rule::ChiSquare {
        rival: declared_distribution(pair.rival, config)?,
    })
}

fn checkpoints(limit: usize) -> impl Iterator<Item = usize> {
    let mut c = 10usize;
    std::iter::from_fn(move || {
        let cur = c;
        c = (c + 1).max((c as f64 * 1.05).ceil() as usize);
        Some(cur)
    })
    .take_while(move |&c| c <= limit)
}

/// Index of the coincidence at which the rival is rejected.
fn rejection_index(
    rule: &Rule,
    outcomes: &[(SideOutcome, SideOutcome)],
    alpha: f64,
) -> Result<Option<usize>, AnalysisError> {
    match rule {
        Rule::Sequence { rival_is_qm, needed } => {
            for (i, o) in outcomes.iter().enumerate() {
                if *o != (SideOutcome::E3, SideOutcome::E3) {
                    return Ok(if *rival_is_qm { None } else { Some(i) });
                }
                if *rival_is_qm && i + 1 >= *needed {
                    return Ok(Some(i));
                }
            }
            Ok(None)
        }
        Rule::ChiSquare { rival } => {
            if let Some(i) = outcomes.iter().position(|&(u, l)| rival.prob(u, l) <= 0.0) {
                return Ok(Some(i));
            }
            let mut table = JointTable::new();
            let mut filled = 0;
            for c in checkpoints(outcomes.len()) {
                for &(u, l) in &outcomes[filled..c] {
                    table.add(u, l);
                }
                filled = c;
                match chi_square_test(&table, rival, alpha) {
                    Ok(r) if r.p_value < alpha => return Ok(Some(c - 1)),
                    Ok(_) | Err(AnalysisError::InsufficientData(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(None)
        }
    }
}

/// Emitted pairs up to and including the coincidence `c`.
fn pairs_elapsed(c: &CoincidenceRecord, det: &DetectorModel) -> u64 {
    match c.upper.pair_id.or(c.lower.pair_id) {
        Some(id) => id + 1,
        None => (c.upper.timestamp * det.pair_rate).floor() as u64 + 1,
    }
}

/// One trial: emitted pairs needed to reject the rival, `None` if censored.
pub fn trial_pairs_needed(
    pair: ModelPair,
    config: &MeasurementConfig,
    det: &DetectorModel,
    alpha: f64,
    max_pairs: u64,
    seed: u64,
    true_only: bool,
) -> Result<Option<u64>, AnalysisError> {
    let rule = rule_for(pair, config, alpha)?;
    trial_with_rule(&rule, pair.truth, config, det, alpha, max_pairs, seed, true_only)
}

#[allow(clippy::too_many_arguments)]
fn trial_with_rule(
    rule: &Rule,
    truth: ModelKind,
    config: &MeasurementConfig,
    det: &DetectorModel,
    alpha: f64,
    max_pairs: u64,
    seed: u64,
    true_only: bool,
) -> Result<Option<u64>, AnalysisError> {
    let cfg = config.clone().with_pairs(max_pairs).with_seed(seed);
    let run = run_experiment_with(&cfg, truth, det, Execution::Sequential)?;
    let matched = match_coincidences_with_delay(&run.clicks, det.coincidence_window, det.lower_delay);
    let coincidences = if true_only {
        true_coincidences(&matched.coincidences)
    } else {
        matched.coincidences
    };
    let with_outcome: Vec<CoincidenceRecord> = coincidences
        .into_iter()
        .filter(|c| c.upper.detector.outcome(cfg.lower_basis).is_some() && c.lower.detector.outcome(cfg.lower_basis).is_some())
        .collect();
    let outcomes = coincidence_outcomes(&with_outcome, cfg.lower_basis);
    Ok(rejection_index(rule, &outcomes, alpha)?.map(|i| pairs_elapsed(&with_outcome[i], det)))
}

/// Pairs-needed samples for every trial at one detector setting.
pub fn sweep_trials(
    pair: ModelPair,
    config: &MeasurementConfig,
    point: SweepPoint,
    alpha: f64,
    options: &SweepOptions,
    point_index: u64,
) -> Result<Vec<Option<u64>>, AnalysisError> {
    let rule = rule_for(pair, config, alpha)?;
    let det = DetectorModel {
        efficiency: point.efficiency,
        dark_rate: point.dark_rate,
        ..options.base_detector
    };
    det.validate()?;
    let point_seed = derive_seed(options.seed, point_index);
    (0..options.trials as u64)
        .into_par_iter()
        .map(|t| {
            trial_with_rule(
                &rule,
                pair.truth,
                config,
                &det,
                alpha,
                options.max_pairs,
                derive_seed(point_seed, t),
                options.true_coincidences_only,
            )
        })
        .collect()
}

/// Median, interval and mean of trial results; censored trials count as +∞.
pub fn summarize_trials(samples: &[Option<u64>]) -> PairsNeeded {
    let n = samples.len();
    if n == 0 {
        return PairsNeeded::Unreachable;
    }
    let mut v: Vec<f64> = samples.iter().map(|s| s.map_or(f64::INFINITY, |x| x as f64)).collect();
    v.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    if !median.is_finite() {
        return PairsNeeded::Unreachable;
    }
    let half = n as f64 / 2.0;
    let spread = 0.98 * (n as f64).sqrt();
    let lo = ((half - spread).floor().max(0.0) as usize).min(n - 1);
    let hi = ((half + spread).ceil() as usize).min(n - 1);
    let mean = v.iter().all(|x| x.is_finite()).then(|| v.iter().sum::<f64>() / n as f64);
    PairsNeeded::Reached {
        median,
        ci_low: v[lo],
        ci_high: v[hi].is_finite().then_some(v[hi]),
        mean,
    }
}

/// Pairs needed to reject `pair.rival` at level `alpha` when data come from
/// `pair.truth`, for each detector setting in `grid`.
pub fn power_sweep(
    pair: ModelPair,
    config: &MeasurementConfig,
    grid: &[SweepPoint],
    alpha: f64,
    options: &SweepOptions,
) -> Result<Vec<SweepRow>, AnalysisError> {
    if options.trials == 0 {
        return Err(AnalysisError::InsufficientData("sweep needs at least one trial".into()));
    }
    grid.par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let samples = sweep_trials(pair, config, p, alpha, options, i as u64)?;
            Ok(SweepRow {
                efficiency: p.efficiency,
                dark_rate: p.dark_rate,
                trials: samples.len(),
                censored: samples.iter().filter(|s| s.is_none()).count(),
                pairs_needed: summarize_trials(&samples),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{catalog, Experiment};

    #[test]
    fn summary_of_uncensored_trials() {
        let s: Vec<Option<u64>> = [1, 2, 2, 3, 7].into_iter().map(Some).collect();
        match summarize_trials(&s) {
            PairsNeeded::Reached { median, mean, .. } => {
                assert_eq!(median, 2.0);
                assert_eq!(mean, Some(3.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mostly_censored_is_unreachable() {
        assert_eq!(summarize_trials(&[None, None, Some(3)]), PairsNeeded::Unreachable);
        assert_eq!(summarize_trials(&[]), PairsNeeded::Unreachable);
    }

    #[test]
    fn strict_model_rejected_at_first_non_e3e3() {
        let pair = ModelPair {
            truth: ModelKind::QuantumMechanics,
            rival: ModelKind::Retrocausal(RetroPolicy::Strict),
        };
        let cfg = catalog(Experiment::E5);
        let rule = rule_for(pair, &cfg, 1e-6).unwrap();
        use SideOutcome::*;
        let seq = [(E3, E3), (E3, E3), (E4, E4)];
        assert_eq!(rejection_index(&rule, &seq, 1e-6).unwrap(), Some(2));
    }

    #[test]
    fn identical_models_are_never_rejected_quickly() {
        let pair = ModelPair {
            truth: ModelKind::QuantumMechanics,
            rival: ModelKind::QuantumMechanics,
        };
        let cfg = catalog(Experiment::E2);
        let r = trial_pairs_needed(pair, &cfg, &DetectorModel::ideal(), 1e-6, 2000, 4, false).unwrap();
        assert_eq!(r, None);
    }

    #[test]
    fn checkpoints_grow() {
        let c: Vec<usize> = checkpoints(30).collect();
        assert_eq!(c.first(), Some(&10));
        assert!(c.windows(2).all(|w| w[1] > w[0]));
        assert!(*c.last().unwrap() <= 30);
    }
}
