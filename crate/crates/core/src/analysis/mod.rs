//! Joint tables, correlations, hypothesis tests and detector power sweeps.

mod hypothesis;
mod sweep;
mod table;

pub use hypothesis::{
    chi_square_test, ks_test, ks_uniform, pairs_to_significance, sequence_test, KsResult, TestReport, Verdict,
    MIN_EXPECTED,
};
pub use sweep::{
    power_sweep, summarize_trials, sweep_trials, trial_pairs_needed, ModelPair, PairsNeeded, SweepOptions, SweepPoint,
    SweepRow,
};
pub use table::{
    binary_correlation, build_table, coincidence_outcomes, true_coincidences, Grouping, JointTable,
};

use thiserror::Error;

use crate::harness::HarnessError;
use crate::models::{ModelError, ModelPrediction};
use crate::quantum::SideOutcome;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("a side takes a single value; correlation undefined")]
    DegenerateMarginal,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

/// Standardized residual `(observed − expected) / sqrt(expected)` for every
/// cell of the prediction or the table. Cells with zero expectation get
/// `+inf` when observed and are skipped otherwise.
pub fn cell_z_scores(table: &JointTable, predicted: &ModelPrediction) -> Vec<((SideOutcome, SideOutcome), f64)> {
    let n = table.total as f64;
    let mut keys: Vec<_> = predicted.cells.keys().chain(table.counts.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|k| {
            let o = table.count(k.0, k.1) as f64;
            let e = predicted.prob(k.0, k.1) * n;
            if e > 0.0 {
                Some((k, (o - e) / e.sqrt()))
            } else if o > 0.0 {
                Some((k, f64::INFINITY))
            } else {
                None
            }
        })
        .collect()
}
