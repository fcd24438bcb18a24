use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::{ball_response, ModelKind, SplitterTag};
use crate::quantum::{make_entangled_state, Basis, Path, Side, SideOutcome};
use crate::sampling::{sample_weighted, stream_rng};
use crate::screen::{
    joint_density, slit_state_intensity, Condition, ScreenGrid, ScreenPattern, ScreenSampler, SlitGeometry,
};

use super::coincidence::CoincidenceRecord;
use super::run::{dark_counts, draw_detection, draw_timestamps, map_pairs, sort_clicks};
use super::{active_detectors, ClickRecord, DetectorId, DetectorModel, Execution, HarnessError, MeasurementConfig};

/// Ground-truth screen hit with the partner's outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenHit {
    pub pair_id: u64,
    pub x: f64,
    pub lower: SideOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenRun {
    pub hits: Vec<ScreenHit>,
    pub clicks: Vec<ClickRecord>,
    pub grid: ScreenGrid,
}

impl ScreenRun {
    /// Positions of hits whose partner gave `lower` (all hits for `None`).
    pub fn positions(&self, lower: Option<SideOutcome>) -> Vec<f64> {
        self.hits
            .iter()
            .filter(|h| lower.is_none_or(|l| h.lower == l))
            .map(|h| h.x)
            .collect()
    }
}

enum ScreenModel {
    Quantum {
        lower_marginal: Vec<(SideOutcome, f64)>,
        samplers: BTreeMap<SideOutcome, ScreenSampler>,
    },
    Ball {
        per_path: [ScreenSampler; 2],
    },
}

fn sampler_for(grid: &ScreenGrid, f: impl Fn(f64) -> f64) -> Result<ScreenSampler, HarnessError> {
    let xs = grid.centers();
    let intensity = xs.iter().map(|&x| f(x)).collect();
    let pattern = ScreenPattern::new(xs, intensity, grid.bin_width())?;
    Ok(ScreenSampler::new(&pattern)?)
}

pub fn run_screen_experiment(
    config: &MeasurementConfig,
    model: ModelKind,
    geometry: &SlitGeometry,
    det: &DetectorModel,
) -> Result<ScreenRun, HarnessError> {
    run_screen_experiment_with(config, model, geometry, det, Execution::default())
}

/// Screen variant: upper photons land on the screen, lower photons meet the
/// configured detectors.
///
/// Quantum mechanics samples the lower outcome first and draws the screen
/// position from the pattern of the collapsed upper slit state. The ball
/// model gives each photon a definite slit, draws the position from that
/// slit's own diffraction pattern, and assigns the shared splitter port with
/// the probability the eraser patterns assign to that position.
pub fn run_screen_experiment_with(
    config: &MeasurementConfig,
    model: ModelKind,
    geometry: &SlitGeometry,
    det: &DetectorModel,
    exec: Execution,
) -> Result<ScreenRun, HarnessError> {
    config.validate()?;
    det.validate()?;
    geometry.validate()?;
    if !config.screen {
        return Err(HarnessError::InvalidConfig("configuration does not route the upper side to the screen".into()));
    }
    let grid = ScreenGrid::default_for(geometry);
    let screen_model = match model {
        ModelKind::QuantumMechanics => {
            let state = make_entangled_state();
            let lower_marginal = state.side_marginal(Side::Lower, config.lower_basis).map_err(crate::models::ModelError::from)?;
            let mut samplers = BTreeMap::new();
            for &(o, p) in &lower_marginal {
                if p <= 0.0 {
                    continue;
                }
                let partner = state
                    .collapse(Side::Lower, config.lower_basis, o)
                    .expect("positive probability");
                let c = partner.amplitudes();
                samplers.insert(o, sampler_for(&grid, |x| slit_state_intensity(geometry, c, x))?);
            }
            ScreenModel::Quantum {
                lower_marginal,
                samplers,
            }
        }
        ModelKind::LocalRealistBall => ScreenModel::Ball {
            per_path: [
                sampler_for(&grid, |x| joint_density(geometry, Condition::OnD1, x))?,
                sampler_for(&grid, |x| joint_density(geometry, Condition::OnD2, x))?,
            ],
        },
        other => return Err(HarnessError::UnsupportedModel(other)),
    };

    let per_pair = map_pairs(config.pair_count, exec, |pair_id| {
        let mut rng = stream_rng(config.seed, pair_id);
        let detection = draw_detection(det, &mut rng);
        let (x, lower) = match &screen_model {
            ScreenModel::Quantum {
                lower_marginal,
                samplers,
            } => {
                let lower = lower_marginal[sample_weighted(lower_marginal.iter().map(|p| p.1), &mut rng)].0;
                (samplers[&lower].sample(&mut rng), lower)
            }
            ScreenModel::Ball { per_path } => {
                let path = if rng.random_bool(0.5) { Path::One } else { Path::Two };
                let x = per_path[path.index()].sample(&mut rng);
                let d3 = joint_density(geometry, Condition::OnD3, x);
                let d4 = joint_density(geometry, Condition::OnD4, x);
                let p3 = if d3 + d4 > 0.0 { d3 / (d3 + d4) } else { 0.5 };
                let tag = if rng.random::<f64>() < p3 {
                    SplitterTag::Three
                } else {
                    SplitterTag::Four
                };
                (x, ball_response(config.lower_basis, path, tag))
            }
        };
        let (t_upper, t_lower) = draw_timestamps(det, pair_id, &mut rng);
        let upper = detection.upper_detected.then_some(ClickRecord {
            detector: DetectorId::Screen,
            timestamp: t_upper,
            pair_id: Some(pair_id),
            screen_x: Some(x),
        });
        let lower_click = detection.lower_detected.then(|| ClickRecord {
            detector: DetectorId::for_outcome(Side::Lower, lower),
            timestamp: t_lower,
            pair_id: Some(pair_id),
            screen_x: None,
        });
        Ok((ScreenHit { pair_id, x, lower }, upper, lower_click))
    })?;

    let mut hits = Vec::with_capacity(per_pair.len());
    let mut clicks = Vec::with_capacity(per_pair.len() * 2);
    for (h, u, l) in per_pair {
        hits.push(h);
        clicks.extend(u);
        clicks.extend(l);
    }
    let duration = config.pair_count as f64 / det.pair_rate;
    clicks.extend(dark_counts(
        det,
        &active_detectors(config),
        duration,
        config.seed,
        Some(grid.half_width),
    ));
    sort_clicks(&mut clicks);
    Ok(ScreenRun { hits, clicks, grid })
}

/// Screen positions from matched coincidences, tagged with the lower
/// outcome their partner click indicates.
pub fn tag_screen_hits(coincidences: &[CoincidenceRecord], lower_basis: Basis) -> Vec<(f64, SideOutcome)> {
    coincidences
        .iter()
        .filter_map(|c| {
            let x = c.upper.screen_x?;
            let lower = c.lower.detector.outcome(lower_basis)?;
            Some((x, lower))
        })
        .collect()
}
