//! Analysis shared by `run` (in memory) and `analyze` (from files).

use std::collections::BTreeMap;

use eraser_core::analysis::{
    binary_correlation, build_table, chi_square_test, coincidence_outcomes, sequence_test, true_coincidences,
    AnalysisError, Grouping, TestReport,
};
use eraser_core::harness::{tag_screen_hits, CoincidenceRecord, DetectorModel, Experiment};
use eraser_core::models::{declared_distribution, ModelKind};
use eraser_core::quantum::{Basis, SideOutcome};
use eraser_core::screen::{fitted_visibility, SlitGeometry};
use serde::{Deserialize, Serialize};

use crate::config::RowCondition;

/// What a run was, as recorded in summary.json and needed to re-analyze it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub experiment: Experiment,
    pub model: String,
    pub pairs: u64,
    pub seed: u64,
    pub upper_basis: Option<Basis>,
    pub lower_basis: Basis,
    pub feedback: bool,
    pub detector: DetectorModel,
    pub geometry: Option<SlitGeometry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Sequence,
    ChiSquare,
    Correlation,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub test: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenVisibility {
    pub e3: Option<f64>,
    pub e4: Option<f64>,
    pub pooled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub against: String,
    pub condition: String,
    pub coincidences: u64,
    pub tests: Vec<TestReport>,
    pub correlation: Option<f64>,
    pub screen_visibility: Option<ScreenVisibility>,
    pub skipped: Vec<Skipped>,
}

pub struct Settings {
    pub selection: Selection,
    pub alpha: f64,
    pub against: ModelKind,
    pub condition: RowCondition,
    pub true_only: bool,
}

fn keep(condition: RowCondition) -> impl Fn(SideOutcome, SideOutcome) -> bool {
    move |_, l| condition == RowCondition::None || l != SideOutcome::D1Click
}

pub fn analyze(coincidences: &[CoincidenceRecord], meta: &RunMeta, s: &Settings) -> AnalysisReport {
    let filtered;
    let coincidences = if s.true_only {
        filtered = true_coincidences(coincidences);
        &filtered[..]
    } else {
        coincidences
    };
    let mut report = AnalysisReport {
        alpha: s.alpha,
        against: s.against.to_string(),
        condition: match s.condition {
            RowCondition::None => "none".into(),
            RowCondition::NoD1 => "no-d1".into(),
        },
        coincidences: coincidences.len() as u64,
        tests: Vec::new(),
        correlation: None,
        screen_visibility: None,
        skipped: Vec::new(),
    };
    let mut skip = |test: &str, reason: String| {
        report.skipped.push(Skipped {
            test: test.into(),
            reason,
        })
    };

    let outcomes = coincidence_outcomes(coincidences, meta.lower_basis);
    let table = build_table(coincidences, meta.lower_basis).filter(keep(s.condition));
    let mut tests = Vec::new();
    let mut correlation = None;

    let run_sequence = match s.selection {
        Selection::Sequence => true,
        Selection::All => meta.feedback,
        _ => false,
    };
    if run_sequence {
        tests.push(sequence_test(&outcomes, s.alpha));
    }

    if matches!(s.selection, Selection::ChiSquare | Selection::All) {
        let config = eraser_core::harness::catalog(meta.experiment);
        let predicted = declared_distribution(s.against, &config).map_err(AnalysisError::from).and_then(|p| {
            p.conditioned(keep(s.condition))
                .ok_or_else(|| AnalysisError::InsufficientData("prediction has no mass under the condition".into()))
        });
        match predicted.and_then(|p| chi_square_test(&table, &p, s.alpha)) {
            Ok(r) => tests.push(r),
            Err(e) => skip("chi-square", e.to_string()),
        }
    }

    if matches!(s.selection, Selection::Correlation | Selection::All) {
        match meta.upper_basis {
            Some(ub) => match binary_correlation(&table, &Grouping::for_bases(ub, meta.lower_basis)) {
                Ok(c) => correlation = Some(c),
                Err(e) => skip("correlation", e.to_string()),
            },
            None => skip("correlation", "upper photons go to the screen".into()),
        }
    }

    if let Some(g) = meta.geometry {
        let tagged = tag_screen_hits(coincidences, meta.lower_basis);
        let window = g.envelope_zero();
        let fit = |want: Option<SideOutcome>| {
            let xs: Vec<f64> = tagged
                .iter()
                .filter(|(_, l)| want.is_none_or(|w| *l == w))
                .map(|(x, _)| *x)
                .collect();
            fitted_visibility(&xs, &g, window).ok()
        };
        report.screen_visibility = Some(ScreenVisibility {
            e3: fit(Some(SideOutcome::E3)),
            e4: fit(Some(SideOutcome::E4)),
            pooled: fit(None),
        });
    }

    report.tests = tests;
    report.correlation = correlation;
    report
}

/// One table cell in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub upper: SideOutcome,
    pub lower: SideOutcome,
    pub value: f64,
}

pub fn cells<I: IntoIterator<Item = ((SideOutcome, SideOutcome), f64)>>(items: I) -> Vec<Cell> {
    items
        .into_iter()
        .map(|((upper, lower), value)| Cell { upper, lower, value })
        .collect()
}

pub fn count_cells(counts: &BTreeMap<(SideOutcome, SideOutcome), u64>) -> Vec<Cell> {
    cells(counts.iter().map(|(&k, &v)| (k, v as f64)))
}

pub fn print_report(r: &AnalysisReport) {
    println!("{:<12} {:>12} {:>12} {:>10} {:>8}  verdict", "test", "statistic", "p-value", "logLR", "pairs");
    for t in &r.tests {
        println!(
            "{:<12} {:>12.5} {:>12.4e} {:>10.4} {:>8}  {:?}",
            t.test_name, t.statistic, t.p_value, t.log_likelihood_ratio, t.n_pairs, t.verdict
        );
    }
    if let Some(c) = r.correlation {
        println!("correlation  {c:.4}");
    }
    if let Some(v) = &r.screen_visibility {
        let f = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("screen visibility  E3 {}  E4 {}  pooled {}", f(v.e3), f(v.e4), f(v.pooled));
    }
    for s in &r.skipped {
        println!("{}: skipped ({})", s.test, s.reason);
    }
}
