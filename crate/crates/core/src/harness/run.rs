use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{ModelKind, PairOutcome, PairSimulator};
use crate::quantum::{Basis, Side};
use crate::sampling::{derive_seed, stream_rng};

use super::{DetectorId, DetectorModel, HarnessError, MeasurementConfig};

const DARK_STREAM_LABEL: u64 = 0xDA2C;

/// One detector event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub detector: DetectorId,
    pub timestamp: f64,
    /// Absent for dark counts.
    pub pair_id: Option<u64>,
    /// Screen position, screen clicks only.
    pub screen_x: Option<f64>,
}

/// Noiseless model output for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawOutcome {
    pub pair_id: u64,
    pub outcome: PairOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Time-ordered click stream after detector imperfections.
    pub clicks: Vec<ClickRecord>,
    /// Ground truth, ordered by pair id.
    pub raw: Vec<RawOutcome>,
}

/// How pairs are distributed over threads. Every pair has its own random
/// stream, so the output does not depend on this choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon's global pool, or a dedicated pool with the given thread count.
    #[default]
    Parallel,
    Threads(usize),
}

/// Detectors that are armed under `config` (and so can produce dark counts).
pub fn active_detectors(config: &MeasurementConfig) -> Vec<DetectorId> {
    use DetectorId::*;
    let mut out = if config.screen {
        vec![Screen]
    } else {
        match config.upper_basis {
            Basis::WhichWay => vec![U1, U2],
            _ => vec![U3, U4],
        }
    };
    match config.lower_basis {
        Basis::WhichWay => out.extend([D1, D2]),
        Basis::Eraser if config.feedback.is_some() => out.extend([D1, D3, D4]),
        Basis::Eraser => out.extend([D3, D4]),
        Basis::HybridD1 => out.extend([D1, D3, D4]),
    }
    out
}

/// Per-pair detection draws, taken in a fixed order from the pair's stream.
pub(super) struct Detection {
    pub upper_detected: bool,
    pub lower_detected: bool,
}

pub(super) fn draw_detection<R: Rng + ?Sized>(det: &DetectorModel, rng: &mut R) -> Detection {
    Detection {
        upper_detected: rng.random_bool(det.efficiency),
        lower_detected: rng.random_bool(det.efficiency),
    }
}

/// Timestamps `(upper, lower)` of a pair emitted at `pair_id / pair_rate`.
pub(super) fn draw_timestamps<R: Rng + ?Sized>(det: &DetectorModel, pair_id: u64, rng: &mut R) -> (f64, f64) {
    let emission = pair_id as f64 / det.pair_rate;
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let upper = emission + det.jitter_sigma * z1;
    let lower = emission + det.lower_delay + det.jitter_sigma * z2;
    (upper.max(0.0), lower.max(0.0))
}

/// Poissonian dark counts on every detector in `detectors` over `[0, duration)`.
/// Screen dark counts land uniformly on `[-screen_half_width, screen_half_width]`.
pub(super) fn dark_counts(
    det: &DetectorModel,
    detectors: &[DetectorId],
    duration: f64,
    seed: u64,
    screen_half_width: Option<f64>,
) -> Vec<ClickRecord> {
    let mean = det.dark_rate * duration;
    if mean <= 0.0 {
        return Vec::new();
    }
    let poisson = Poisson::new(mean).expect("positive finite mean");
    let dark_seed = derive_seed(seed, DARK_STREAM_LABEL);
    let mut out = Vec::new();
    for &d in detectors {
        let mut rng = stream_rng(dark_seed, d.index());
        let n = poisson.sample(&mut rng) as u64;
        for _ in 0..n {
            let t = rng.random::<f64>() * duration;
            let screen_x = match (d, screen_half_width) {
                (DetectorId::Screen, Some(hw)) => Some((2.0 * rng.random::<f64>() - 1.0) * hw),
                _ => None,
            };
            out.push(ClickRecord {
                detector: d,
                timestamp: t,
                pair_id: None,
                screen_x,
            });
        }
    }
    out
}

pub(super) fn sort_clicks(clicks: &mut [ClickRecord]) {
    clicks.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then(a.detector.cmp(&b.detector))
            .then(a.pair_id.cmp(&b.pair_id))
    });
}

/// Run `f` over all pair ids under the chosen execution strategy, keeping
/// results in pair order.
pub(super) fn map_pairs<T, F>(count: u64, exec: Execution, f: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(u64) -> Result<T, HarnessError> + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..count).map(&f).collect(),
        Execution::Parallel => (0..count).into_par_iter().map(&f).collect(),
        Execution::Threads(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| HarnessError::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| (0..count).into_par_iter().map(&f).collect())
        }
    }
}

pub fn run_experiment(
    config: &MeasurementConfig,
    model: ModelKind,
    det: &DetectorModel,
) -> Result<RunOutput, HarnessError> {
    run_experiment_with(config, model, det, Execution::default())
}

/// Simulate `config.pair_count` pairs and pass them through the detectors.
///
/// The upper click's detection is decided before the model runs, and the
/// feedback line only fires on a detected trigger click.
pub fn run_experiment_with(
    config: &MeasurementConfig,
    model: ModelKind,
    det: &DetectorModel,
    exec: Execution,
) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    det.validate()?;
    if config.screen {
        return Err(HarnessError::InvalidConfig(
            "screen configurations need a slit geometry; use run_screen_experiment".into(),
        ));
    }
    let sim = PairSimulator::new(model, config)?;
    let per_pair = map_pairs(config.pair_count, exec, |pair_id| {
        let mut rng = stream_rng(config.seed, pair_id);
        let detection = draw_detection(det, &mut rng);
        let outcome = sim.sample(detection.upper_detected, &mut rng)?;
        let (t_upper, t_lower) = draw_timestamps(det, pair_id, &mut rng);
        let upper = detection.upper_detected.then(|| ClickRecord {
            detector: DetectorId::for_outcome(Side::Upper, outcome.upper),
            timestamp: t_upper,
            pair_id: Some(pair_id),
            screen_x: None,
        });
        let lower = detection.lower_detected.then(|| ClickRecord {
            detector: DetectorId::for_outcome(Side::Lower, outcome.lower),
            timestamp: t_lower,
            pair_id: Some(pair_id),
            screen_x: None,
        });
        Ok((RawOutcome { pair_id, outcome }, upper, lower))
    })?;

    let mut clicks = Vec::with_capacity(per_pair.len() * 2);
    let mut raw = Vec::with_capacity(per_pair.len());
    for (r, u, l) in per_pair {
        raw.push(r);
        clicks.extend(u);
        clicks.extend(l);
    }
    let duration = config.pair_count as f64 / det.pair_rate;
    clicks.extend(dark_counts(det, &active_detectors(config), duration, config.seed, None));
    sort_clicks(&mut clicks);
    Ok(RunOutput { clicks, raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{catalog, Experiment};

    #[test]
    fn ideal_detectors_reproduce_raw_outcomes() {
        let cfg = catalog(Experiment::E4).with_pairs(500).with_seed(3);
        let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &DetectorModel::ideal()).unwrap();
        assert_eq!(out.clicks.len(), 1000);
        for r in &out.raw {
            let mine: Vec<_> = out.clicks.iter().filter(|c| c.pair_id == Some(r.pair_id)).collect();
            assert_eq!(mine.len(), 2);
            let up = mine.iter().find(|c| c.detector.side() == Side::Upper).unwrap();
            let lo = mine.iter().find(|c| c.detector.side() == Side::Lower).unwrap();
            assert_eq!(up.detector, DetectorId::for_outcome(Side::Upper, r.outcome.upper));
            assert_eq!(lo.detector, DetectorId::for_outcome(Side::Lower, r.outcome.lower));
        }
    }

    #[test]
    fn zero_efficiency_leaves_only_dark_counts() {
        let cfg = catalog(Experiment::E2).with_pairs(2000).with_seed(8);
        let det = DetectorModel {
            efficiency: 0.0,
            dark_rate: 500.0,
            ..DetectorModel::ideal()
        };
        let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &det).unwrap();
        assert!(!out.clicks.is_empty());
        assert!(out.clicks.iter().all(|c| c.pair_id.is_none()));
        assert_eq!(out.raw.len(), 2000);
    }

    #[test]
    fn clicks_are_time_ordered_and_non_negative() {
        let cfg = catalog(Experiment::E5).with_pairs(3000).with_seed(1);
        let out = run_experiment(&cfg, ModelKind::QuantumMechanics, &super::super::DetectorPreset::Mkid.model()).unwrap();
        assert!(out.clicks.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert!(out.clicks.iter().all(|c| c.timestamp >= 0.0 && c.timestamp.is_finite()));
    }

    #[test]
    fn screen_config_is_rejected_here() {
        let cfg = catalog(Experiment::E6).with_pairs(10);
        assert!(matches!(
            run_experiment(&cfg, ModelKind::QuantumMechanics, &DetectorModel::ideal()),
            Err(HarnessError::InvalidConfig(_))
        ));
    }

    #[test]
    fn active_detector_sets() {
        use DetectorId::*;
        assert_eq!(active_detectors(&catalog(Experiment::E1)), vec![U1, U2, D1, D2]);
        assert_eq!(active_detectors(&catalog(Experiment::E5)), vec![U3, U4, D1, D3, D4]);
        assert_eq!(active_detectors(&catalog(Experiment::E6)), vec![Screen, D3, D4]);
    }
}
