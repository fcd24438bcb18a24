//! Simulation of entangled-photon eraser experiments with an optional
//! feedback line, under quantum mechanics and several hidden-variable rivals.
//!
//! * [`quantum`]: two-photon path state, measurement arrangements, Born rule.
//! * [`screen`]: double-slit screen patterns conditioned on the partner.
//! * [`models`]: the rival models and their declared outcome tables.
//! * [`harness`]: experiment catalog, detectors, timing and coincidences.
//! * [`analysis`]: joint tables, tests of model pairs, power sweeps.
//! * [`io`]: on-disk formats.

pub mod analysis;
pub mod harness;
pub mod io;
pub mod models;
pub mod quantum;
pub mod sampling;
pub mod screen;

pub use analysis::{AnalysisError, JointTable, TestReport, Verdict};
pub use harness::{catalog, DetectorModel, DetectorPreset, Experiment, HarnessError, MeasurementConfig};
pub use models::{declared_distribution, ModelError, ModelKind, ModelPrediction, RetroPolicy};
pub use quantum::{Basis, JointState, SideOutcome};
pub use screen::{Condition, ScreenError, ScreenPattern, SlitGeometry};
