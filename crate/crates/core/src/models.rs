//! Standard quantum mechanics and three hidden-variable accounts of the
//! eraser experiments.
//!
//! * [`ModelKind::QuantumMechanics`]: Born rule with collapse on detection.
//! * [`ModelKind::LocalRealistBall`]: each photon takes one definite path and
//!   both photons of a pair leave their splitters through the same port.
//! * [`ModelKind::Retrocausal`]: like the ball model, except that switching
//!   on D1 reaches back and re-randomizes the upper port. With a feedback
//!   line this makes the history depend on itself; only self-consistent
//!   histories are kept.
//! * [`ModelKind::Superdeterministic`]: hidden variables already correlated
//!   with the detector settings at emission; outcome statistics coincide
//!   with quantum mechanics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::MeasurementConfig;
use crate::quantum::{
    make_entangled_state, measure_sequential, measure_side, Basis, JointState, OutcomeProbs, Path,
    QuantumError, Side, SideOutcome,
};
use crate::sampling::sample_weighted;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no self-consistent history exists for this configuration")]
    NoConsistentHistory,
    #[error("model {0} has no history enumeration")]
    NotRetrocausal(ModelKind),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// How the retrocausal model resolves the feedback loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RetroPolicy {
    /// Only the history in which D1 is never switched on by the feedback
    /// line survives.
    #[default]
    Strict,
    /// Every fixed point of the loop, weighted by its prior probability with
    /// both lower settings equally likely a priori.
    NovikovUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    QuantumMechanics,
    LocalRealistBall,
    Retrocausal(RetroPolicy),
    Superdeterministic,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::QuantumMechanics => "qm",
            ModelKind::LocalRealistBall => "ball",
            ModelKind::Retrocausal(RetroPolicy::Strict) => "retro-strict",
            ModelKind::Retrocausal(RetroPolicy::NovikovUniform) => "retro-novikov",
            ModelKind::Superdeterministic => "superdeterministic",
        }
    }

    pub const ALL: [ModelKind; 5] = [
        ModelKind::QuantumMechanics,
        ModelKind::LocalRealistBall,
        ModelKind::Retrocausal(RetroPolicy::Strict),
        ModelKind::Retrocausal(RetroPolicy::NovikovUniform),
        ModelKind::Superdeterministic,
    ];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "qm" | "quantum" | "quantum-mechanics" => Ok(ModelKind::QuantumMechanics),
            "ball" | "local-realist" | "local-realist-ball" => Ok(ModelKind::LocalRealistBall),
            "retro" | "retrocausal" | "retro-strict" => Ok(ModelKind::Retrocausal(RetroPolicy::Strict)),
            "retro-novikov" => Ok(ModelKind::Retrocausal(RetroPolicy::NovikovUniform)),
            "superdeterministic" | "superdet" => Ok(ModelKind::Superdeterministic),
            other => Err(format!("unknown model '{other}'")),
        }
    }
}

impl FromStr for RetroPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "strict" => Ok(RetroPolicy::Strict),
            "novikov-uniform" | "novikov" => Ok(RetroPolicy::NovikovUniform),
            other => Err(format!("unknown retro policy '{other}'")),
        }
    }
}

/// Exit port of a 50:50 splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SplitterTag {
    Three,
    Four,
}

impl SplitterTag {
    pub const ALL: [SplitterTag; 2] = [SplitterTag::Three, SplitterTag::Four];

    pub fn outcome(self) -> SideOutcome {
        match self {
            SplitterTag::Three => SideOutcome::E3,
            SplitterTag::Four => SideOutcome::E4,
        }
    }

    pub fn from_outcome(o: SideOutcome) -> Option<Self> {
        match o {
            SideOutcome::E3 => Some(SplitterTag::Three),
            SideOutcome::E4 => Some(SplitterTag::Four),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            SplitterTag::Three => 3,
            SplitterTag::Four => 4,
        }
    }
}

/// Model-specific part of the hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HiddenExtra {
    /// Retrocausal history: whether D1 was on, and the lower photon's own
    /// port when it differs from the upper one.
    Retro { d1_on: bool, lower_tag: SplitterTag },
    /// Lower eraser port when it was not forced equal to the upper one.
    Superdeterministic { lower_tag: Option<SplitterTag> },
}

/// Hidden state of a pair: its path and (upper) splitter port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HiddenVariable {
    pub path: Path,
    pub splitter_tag: SplitterTag,
    pub extra: Option<HiddenExtra>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub upper: SideOutcome,
    pub lower: SideOutcome,
    pub hidden: Option<HiddenVariable>,
    pub resolved_lower_basis: Basis,
}

/// Exact joint outcome table a model declares for a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPrediction {
    pub model: ModelKind,
    pub cells: OutcomeProbs,
}

impl ModelPrediction {
    pub fn prob(&self, upper: SideOutcome, lower: SideOutcome) -> f64 {
        self.cells.get(&(upper, lower)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.cells.values().sum()
    }

    pub fn upper_marginal(&self) -> BTreeMap<SideOutcome, f64> {
        let mut m = BTreeMap::new();
        for (&(u, _), &p) in &self.cells {
            *m.entry(u).or_insert(0.0) += p;
        }
        m
    }

    pub fn lower_marginal(&self) -> BTreeMap<SideOutcome, f64> {
        let mut m = BTreeMap::new();
        for (&(_, l), &p) in &self.cells {
            *m.entry(l).or_insert(0.0) += p;
        }
        m
    }

    /// Restriction to the cells accepted by `keep`, renormalized. `None`
    /// if the kept cells carry no probability.
    pub fn conditioned<F>(&self, keep: F) -> Option<ModelPrediction>
    where
        F: Fn(SideOutcome, SideOutcome) -> bool,
    {
        let cells: OutcomeProbs = self
            .cells
            .iter()
            .filter(|(&(u, l), _)| keep(u, l))
            .map(|(&k, &p)| (k, p))
            .collect();
        let mass: f64 = cells.values().sum();
        (mass > 0.0).then(|| ModelPrediction {
            model: self.model,
            cells: cells.into_iter().map(|(k, p)| (k, p / mass)).collect(),
        })
    }
}

/// One candidate history of the retrocausal model, grouped by its
/// observable content. `support` lists the hidden draws realizing it with
/// weights conditional on the history (summing to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub assumed_lower_basis: Basis,
    pub upper: SideOutcome,
    pub lower: SideOutcome,
    pub support: Vec<(HiddenVariable, f64)>,
}

impl History {
    pub fn d1_on(&self) -> bool {
        self.assumed_lower_basis == Basis::HybridD1
    }
}

fn coin<R: Rng + ?Sized>(rng: &mut R) -> bool {
    rng.random_bool(0.5)
}

fn random_path<R: Rng + ?Sized>(rng: &mut R) -> Path {
    if coin(rng) {
        Path::One
    } else {
        Path::Two
    }
}

fn random_tag<R: Rng + ?Sized>(rng: &mut R) -> SplitterTag {
    if coin(rng) {
        SplitterTag::Three
    } else {
        SplitterTag::Four
    }
}

/// Detector response of a photon with definite path and splitter port.
pub fn ball_response(basis: Basis, path: Path, tag: SplitterTag) -> SideOutcome {
    match basis {
        Basis::WhichWay => match path {
            Path::One => SideOutcome::P1,
            Path::Two => SideOutcome::P2,
        },
        Basis::Eraser => tag.outcome(),
        Basis::HybridD1 => match path {
            Path::One => SideOutcome::D1Click,
            Path::Two => tag.outcome(),
        },
    }
}

/// All outcome cells a configuration can produce, each with probability 0.
fn empty_cells(config: &MeasurementConfig) -> OutcomeProbs {
    let mut cells = OutcomeProbs::new();
    for &u in config.upper_basis.outcomes() {
        for &l in config.resolve_lower_basis(u, true).outcomes() {
            cells.insert((u, l), 0.0);
        }
    }
    cells
}

fn check(config: &MeasurementConfig) -> Result<(), ModelError> {
    config
        .validate()
        .map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    if config.screen {
        return Err(ModelError::InvalidConfig(
            "screen configurations are simulated by the screen harness".into(),
        ));
    }
    Ok(())
}

fn qm_distribution(state: &JointState, config: &MeasurementConfig) -> Result<OutcomeProbs, ModelError> {
    let mut cells = empty_cells(config);
    for (u, pu) in state.side_marginal(Side::Upper, config.upper_basis)? {
        let Some(partner) = state.collapse(Side::Upper, config.upper_basis, u) else {
            continue;
        };
        let lower_basis = config.resolve_lower_basis(u, true);
        for (l, pl) in partner.outcome_probs(lower_basis) {
            *cells.entry((u, l)).or_insert(0.0) += pu * pl;
        }
    }
    Ok(cells)
}

fn ball_distribution(config: &MeasurementConfig) -> OutcomeProbs {
    let mut cells = empty_cells(config);
    for path in Path::ALL {
        for tag in SplitterTag::ALL {
            let u = ball_response(config.upper_basis, path, tag);
            let l = ball_response(config.resolve_lower_basis(u, true), path, tag);
            *cells.entry((u, l)).or_insert(0.0) += 0.25;
        }
    }
    cells
}

/// Enumerate the self-consistent histories of the retrocausal model.
///
/// A candidate history fixes an assumed lower setting, a hidden draw and
/// the outcomes they imply. Without feedback the setting is the configured
/// one; with feedback both settings are candidates with prior 1/2 each and
/// a history survives only if the wiring, fed its own upper outcome,
/// reproduces the assumed setting. With D1 on, the upper port is drawn
/// independently of the lower one. Under [`RetroPolicy::Strict`], a
/// feedback configuration additionally loses every history in which the
/// wiring switched D1 on.
pub fn consistent_histories(
    model: ModelKind,
    config: &MeasurementConfig,
) -> Result<Vec<(History, f64)>, ModelError> {
    let ModelKind::Retrocausal(policy) = model else {
        return Err(ModelError::NotRetrocausal(model));
    };
    check(config)?;
    enumerate_histories(policy, config)
}

fn enumerate_histories(
    policy: RetroPolicy,
    config: &MeasurementConfig,
) -> Result<Vec<(History, f64)>, ModelError> {
    let settings: Vec<(Basis, f64)> = match config.feedback {
        Some(_) => vec![(config.lower_basis, 0.5), (Basis::HybridD1, 0.5)],
        None => vec![(config.lower_basis, 1.0)],
    };
    type Key = (Basis, SideOutcome, SideOutcome);
    let mut groups: BTreeMap<Key, Vec<(HiddenVariable, f64)>> = BTreeMap::new();
    for (setting, prior) in settings {
        let d1_on = setting == Basis::HybridD1;
        if d1_on && config.feedback.is_some() && policy == RetroPolicy::Strict {
            continue;
        }
        let mut draws = Vec::new();
        for path in Path::ALL {
            if d1_on {
                for upper_tag in SplitterTag::ALL {
                    for lower_tag in SplitterTag::ALL {
                        draws.push((path, upper_tag, lower_tag, 0.125));
                    }
                }
            } else {
                for tag in SplitterTag::ALL {
                    draws.push((path, tag, tag, 0.25));
                }
            }
        }
        for (path, upper_tag, lower_tag, w) in draws {
            let u = ball_response(config.upper_basis, path, upper_tag);
            if config.feedback.is_some() && config.resolve_lower_basis(u, true) != setting {
                continue;
            }
            let l = ball_response(setting, path, lower_tag);
            let hidden = HiddenVariable {
                path,
                splitter_tag: upper_tag,
                extra: Some(HiddenExtra::Retro { d1_on, lower_tag }),
            };
            groups.entry((setting, u, l)).or_default().push((hidden, prior * w));
        }
    }
    let total: f64 = groups.values().flatten().map(|(_, w)| w).sum();
    if groups.is_empty() || total <= 0.0 {
        return Err(ModelError::NoConsistentHistory);
    }
    Ok(groups
        .into_iter()
        .map(|((assumed_lower_basis, upper, lower), support)| {
            let mass: f64 = support.iter().map(|(_, w)| w).sum();
            let support = support.into_iter().map(|(h, w)| (h, w / mass)).collect();
            let history = History {
                assumed_lower_basis,
                upper,
                lower,
                support,
            };
            (history, mass / total)
        })
        .collect())
}

fn retro_distribution(policy: RetroPolicy, config: &MeasurementConfig) -> Result<OutcomeProbs, ModelError> {
    let mut cells = empty_cells(config);
    for (h, w) in enumerate_histories(policy, config)? {
        *cells.entry((h.upper, h.lower)).or_insert(0.0) += w;
    }
    Ok(cells)
}

/// Closed-form joint outcome table of `model` under `config`.
pub fn declared_distribution(model: ModelKind, config: &MeasurementConfig) -> Result<ModelPrediction, ModelError> {
    check(config)?;
    let cells = match model {
        ModelKind::QuantumMechanics | ModelKind::Superdeterministic => {
            qm_distribution(&make_entangled_state(), config)?
        }
        ModelKind::LocalRealistBall => ball_distribution(config),
        ModelKind::Retrocausal(policy) => retro_distribution(policy, config)?,
    };
    Ok(ModelPrediction { model, cells })
}

#[derive(Debug, Clone)]
enum Prepared {
    Quantum(JointState),
    Ball,
    Retro {
        live: Vec<(History, f64)>,
        dead: Vec<(History, f64)>,
    },
    Superdeterministic {
        live: Vec<((SideOutcome, SideOutcome), f64)>,
        dead: Vec<((SideOutcome, SideOutcome), f64)>,
    },
}

/// A model bound to a configuration, ready to generate pairs. Immutable and
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct PairSimulator {
    model: ModelKind,
    config: MeasurementConfig,
    prepared: Prepared,
}

impl PairSimulator {
    pub fn new(model: ModelKind, config: &MeasurementConfig) -> Result<Self, ModelError> {
        check(config)?;
        let dead_config = config.without_feedback();
        let prepared = match model {
            ModelKind::QuantumMechanics => Prepared::Quantum(make_entangled_state()),
            ModelKind::LocalRealistBall => Prepared::Ball,
            ModelKind::Retrocausal(policy) => Prepared::Retro {
                live: enumerate_histories(policy, config)?,
                dead: enumerate_histories(policy, &dead_config)?,
            },
            ModelKind::Superdeterministic => {
                let state = make_entangled_state();
                Prepared::Superdeterministic {
                    live: qm_distribution(&state, config)?.into_iter().collect(),
                    dead: qm_distribution(&state, &dead_config)?.into_iter().collect(),
                }
            }
        };
        Ok(Self {
            model,
            config: config.clone(),
            prepared,
        })
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn config(&self) -> &MeasurementConfig {
        &self.config
    }

    /// Generate one pair. `feedback_live` false means the trigger click was
    /// lost and the feedback line stays idle for this pair.
    pub fn sample<R: Rng + ?Sized>(&self, feedback_live: bool, rng: &mut R) -> Result<PairOutcome, ModelError> {
        let cfg = &self.config;
        let live = feedback_live && cfg.feedback.is_some();
        match &self.prepared {
            Prepared::Quantum(state) => {
                if cfg.feedback.is_some() {
                    let (upper, partner) = measure_side(state, Side::Upper, cfg.upper_basis, rng)?;
                    let resolved = cfg.resolve_lower_basis(upper, live);
                    let lower = partner.sample(resolved, rng);
                    Ok(PairOutcome {
                        upper,
                        lower,
                        hidden: None,
                        resolved_lower_basis: resolved,
                    })
                } else {
                    let (upper, lower) =
                        measure_sequential(state, cfg.temporal_order, cfg.upper_basis, cfg.lower_basis, rng)?;
                    Ok(PairOutcome {
                        upper,
                        lower,
                        hidden: None,
                        resolved_lower_basis: cfg.lower_basis,
                    })
                }
            }
            Prepared::Ball => {
                let path = random_path(rng);
                let tag = random_tag(rng);
                let upper = ball_response(cfg.upper_basis, path, tag);
                let resolved = cfg.resolve_lower_basis(upper, live);
                Ok(PairOutcome {
                    upper,
                    lower: ball_response(resolved, path, tag),
                    hidden: Some(HiddenVariable {
                        path,
                        splitter_tag: tag,
                        extra: None,
                    }),
                    resolved_lower_basis: resolved,
                })
            }
            Prepared::Retro { live: l, dead: d } => {
                let histories = if live { l } else { d };
                let (h, _) = &histories[sample_weighted(histories.iter().map(|h| h.1), rng)];
                let (hidden, _) = h.support[sample_weighted(h.support.iter().map(|s| s.1), rng)];
                Ok(PairOutcome {
                    upper: h.upper,
                    lower: h.lower,
                    hidden: Some(hidden),
                    resolved_lower_basis: h.assumed_lower_basis,
                })
            }
            Prepared::Superdeterministic { live: l, dead: d } => {
                let table = if live { l } else { d };
                let ((upper, lower), _) = table[sample_weighted(table.iter().map(|c| c.1), rng)];
                let resolved = cfg.resolve_lower_basis(upper, live);
                Ok(PairOutcome {
                    upper,
                    lower,
                    hidden: Some(backfill_hidden(upper, lower, resolved, rng)),
                    resolved_lower_basis: resolved,
                })
            }
        }
    }
}

/// Hidden state consistent with an observed outcome pair: path and port are
/// read off the outcomes where they are defined and drawn at random where not.
fn backfill_hidden<R: Rng + ?Sized>(
    upper: SideOutcome,
    lower: SideOutcome,
    lower_basis: Basis,
    rng: &mut R,
) -> HiddenVariable {
    let path = match (upper, lower, lower_basis) {
        (SideOutcome::P1, _, _) | (_, SideOutcome::P1, _) | (_, SideOutcome::D1Click, _) => Path::One,
        (SideOutcome::P2, _, _) | (_, SideOutcome::P2, _) => Path::Two,
        (_, SideOutcome::E3 | SideOutcome::E4, Basis::HybridD1) => Path::Two,
        _ => random_path(rng),
    };
    let upper_tag = SplitterTag::from_outcome(upper);
    let lower_tag = SplitterTag::from_outcome(lower);
    let splitter_tag = upper_tag.or(lower_tag).unwrap_or_else(|| random_tag(rng));
    let extra = match (upper_tag, lower_tag) {
        (Some(a), Some(b)) if a != b => Some(b),
        _ => None,
    };
    HiddenVariable {
        path,
        splitter_tag,
        extra: Some(HiddenExtra::Superdeterministic { lower_tag: extra }),
    }
}

/// One pair from `model` under `config`.
pub fn simulate_pair<R: Rng + ?Sized>(
    model: ModelKind,
    config: &MeasurementConfig,
    rng: &mut R,
) -> Result<PairOutcome, ModelError> {
    PairSimulator::new(model, config)?.sample(true, rng)
}
