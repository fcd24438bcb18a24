//! Experiment catalog, batch runs with detector imperfections, and
//! coincidence matching.

mod coincidence;
mod config;
mod detector;
mod run;
mod screen;

pub use coincidence::{
    accidental_rate, match_coincidences, match_coincidences_with_delay, CoincidenceRecord, MatchResult,
};
pub use config::{catalog, Experiment, FeedbackEffect, FeedbackRule, MeasurementConfig};
pub use detector::{DetectorId, DetectorModel, DetectorPreset};
pub use run::{
    active_detectors, run_experiment, run_experiment_with, ClickRecord, Execution, RawOutcome, RunOutput,
};
pub use screen::{run_screen_experiment, run_screen_experiment_with, tag_screen_hits, ScreenHit, ScreenRun};

use thiserror::Error;

use crate::models::{ModelError, ModelKind};
use crate::screen::ScreenError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid detector model: {0}")]
    InvalidDetector(String),
    #[error("model {0} has no screen mode")]
    UnsupportedModel(ModelKind),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
}
