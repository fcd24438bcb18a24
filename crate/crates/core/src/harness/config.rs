use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::quantum::{Basis, MeasurementOrder, Side, SideOutcome};

use super::HarnessError;

/// What the feedback line does when its trigger fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeedbackEffect {
    TurnOnD1,
}

/// Classical wiring from an upper eraser detector to the lower D1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeedbackRule {
    pub trigger: SideOutcome,
    pub effect: FeedbackEffect,
}

impl FeedbackRule {
    pub fn turn_on_d1_on(trigger: SideOutcome) -> Self {
        Self {
            trigger,
            effect: FeedbackEffect::TurnOnD1,
        }
    }
}

/// Settings of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub upper_basis: Basis,
    /// Lower arrangement when no feedback fires.
    pub lower_basis: Basis,
    pub feedback: Option<FeedbackRule>,
    /// Upper photons go to the screen instead of detectors.
    pub screen: bool,
    pub pair_count: u64,
    pub seed: u64,
    pub temporal_order: MeasurementOrder,
}

impl MeasurementConfig {
    pub fn new(upper_basis: Basis, lower_basis: Basis) -> Self {
        Self {
            upper_basis,
            lower_basis,
            feedback: None,
            screen: false,
            pair_count: 1,
            seed: 0,
            temporal_order: MeasurementOrder::UpperFirst,
        }
    }

    pub fn with_pairs(mut self, pair_count: u64) -> Self {
        self.pair_count = pair_count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_order(mut self, order: MeasurementOrder) -> Self {
        self.temporal_order = order;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.pair_count == 0 {
            return invalid("pair count must be at least 1");
        }
        if !self.upper_basis.is_legal_for(Side::Upper) {
            return invalid("the hybrid D1 arrangement exists only on the lower side");
        }
        if let Some(rule) = self.feedback {
            if !rule.trigger.is_eraser_port() {
                return invalid("feedback trigger must be an eraser port (E3 or E4)");
            }
            if self.upper_basis != Basis::Eraser || self.screen {
                return invalid("feedback needs upper eraser detectors");
            }
            if self.lower_basis != Basis::Eraser {
                return invalid("feedback toggles D1 in front of the lower eraser; lower basis must be eraser");
            }
            if self.temporal_order != MeasurementOrder::UpperFirst {
                return invalid("feedback requires the upper photon to be detected first");
            }
        }
        Ok(())
    }

    /// Lower arrangement actually in place for a pair whose upper photon gave
    /// `upper`. `feedback_live` is false when the trigger click was lost, in
    /// which case the wiring does not fire.
    pub fn resolve_lower_basis(&self, upper: SideOutcome, feedback_live: bool) -> Basis {
        match self.feedback {
            Some(rule) if feedback_live && rule.trigger == upper => match rule.effect {
                FeedbackEffect::TurnOnD1 => Basis::HybridD1,
            },
            _ => self.lower_basis,
        }
    }

    /// The same settings with the feedback line disconnected.
    pub fn without_feedback(&self) -> Self {
        Self {
            feedback: None,
            ..self.clone()
        }
    }
}

/// Named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Experiment {
    /// Which-way on both sides.
    E1,
    /// Eraser on both sides.
    E2,
    /// Eraser above, which-way below.
    E3,
    /// Eraser above; D1, D3 and D4 below.
    E4,
    /// Eraser on both sides, U4 switches on D1.
    E5,
    /// Upper photons on a screen, lower eraser.
    E6,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::E1,
        Experiment::E2,
        Experiment::E3,
        Experiment::E4,
        Experiment::E5,
        Experiment::E6,
    ];
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown experiment '{s}' (expected E1..E6)"))
    }
}

pub fn catalog(name: Experiment) -> MeasurementConfig {
    use Basis::*;
    match name {
        Experiment::E1 => MeasurementConfig::new(WhichWay, WhichWay),
        Experiment::E2 => MeasurementConfig::new(Eraser, Eraser),
        Experiment::E3 => MeasurementConfig::new(Eraser, WhichWay),
        Experiment::E4 => MeasurementConfig::new(Eraser, HybridD1),
        Experiment::E5 => MeasurementConfig {
            feedback: Some(FeedbackRule::turn_on_d1_on(SideOutcome::E4)),
            ..MeasurementConfig::new(Eraser, Eraser)
        },
        Experiment::E6 => MeasurementConfig {
            screen: true,
            ..MeasurementConfig::new(Eraser, Eraser)
        },
    }
}
