//! CSV and JSON files written by a run and read back by the analysis.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::JointTable;
use crate::harness::{ClickRecord, DetectorId, RawOutcome, ScreenHit};
use crate::models::HiddenExtra;
use crate::quantum::Basis;
use crate::screen::{joint_density, Condition, ScreenGrid, SlitGeometry};

pub const CLICKS_HEADER: [&str; 4] = ["pairId", "detectorId", "timestamp_s", "screenX_m"];
pub const OUTCOMES_HEADER: [&str; 7] = [
    "pairId",
    "upper",
    "lower",
    "resolvedLowerBasis",
    "hiddenPath",
    "hiddenTag",
    "hiddenDetail",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
}

fn open(path: &FsPath) -> Result<File, IoError> {
    File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &FsPath) -> Result<File, IoError> {
    File::create(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Timestamp as written to disk: 12 significant digits.
pub fn format_timestamp(t: f64) -> String {
    format!("{t:.11e}")
}

/// Round timestamps to their on-disk precision, so that in-memory analysis
/// and analysis of the written file agree exactly.
pub fn quantize_clicks(clicks: &mut [ClickRecord]) {
    for c in clicks {
        c.timestamp = format_timestamp(c.timestamp).parse().expect("formatted float parses");
    }
}

pub fn write_clicks<W: Write>(out: W, clicks: &[ClickRecord]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLICKS_HEADER)?;
    for c in clicks {
        w.write_record([
            c.pair_id.map(|p| p.to_string()).unwrap_or_default(),
            c.detector.to_string(),
            format_timestamp(c.timestamp),
            c.screen_x.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| IoError::File {
        path: "<clicks>".into(),
        source: e,
    })?;
    Ok(())
}

#[derive(Deserialize)]
struct ClickRow {
    #[serde(rename = "pairId")]
    pair_id: Option<u64>,
    #[serde(rename = "detectorId")]
    detector: String,
    #[serde(rename = "timestamp_s")]
    timestamp: f64,
    #[serde(rename = "screenX_m")]
    screen_x: Option<f64>,
}

pub fn read_clicks<R: Read>(input: R) -> Result<Vec<ClickRecord>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CLICKS_HEADER) {
        return Err(IoError::Malformed {
            row: 0,
            message: format!("expected header {}", CLICKS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<ClickRow>().enumerate() {
        let row = row?;
        let malformed = |message: String| IoError::Malformed { row: i + 1, message };
        let detector: DetectorId = row.detector.parse().map_err(malformed)?;
        if !(row.timestamp.is_finite() && row.timestamp >= 0.0) {
            return Err(malformed(format!("bad timestamp {}", row.timestamp)));
        }
        out.push(ClickRecord {
            detector,
            timestamp: row.timestamp,
            pair_id: row.pair_id,
            screen_x: row.screen_x,
        });
    }
    Ok(out)
}

pub fn write_clicks_file(path: &FsPath, clicks: &[ClickRecord]) -> Result<(), IoError> {
    write_clicks(create(path)?, clicks)
}

pub fn read_clicks_file(path: &FsPath) -> Result<Vec<ClickRecord>, IoError> {
    read_clicks(open(path)?)
}

/// Ground-truth outcomes, one row per pair.
pub fn write_outcomes<W: Write>(out: W, raw: &[RawOutcome]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTCOMES_HEADER)?;
    for r in raw {
        let o = &r.outcome;
        let (path, tag, detail) = match o.hidden {
            Some(h) => (
                h.path.number().to_string(),
                h.splitter_tag.number().to_string(),
                match h.extra {
                    Some(HiddenExtra::Retro { d1_on, lower_tag }) => {
                        format!("d1={};lowerTag={}", if d1_on { "on" } else { "off" }, lower_tag.number())
                    }
                    Some(HiddenExtra::Superdeterministic { lower_tag: Some(t) }) => format!("lowerTag={}", t.number()),
                    Some(HiddenExtra::Superdeterministic { lower_tag: None }) => String::new(),
                    None => String::new(),
                },
            ),
            None => Default::default(),
        };
        w.write_record([
            r.pair_id.to_string(),
            o.upper.to_string(),
            o.lower.to_string(),
            o.resolved_lower_basis.to_string(),
            path,
            tag,
            detail,
        ])?;
    }
    w.flush().map_err(|e| IoError::File {
        path: "<outcomes>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_outcomes_file(path: &FsPath, raw: &[RawOutcome]) -> Result<(), IoError> {
    write_outcomes(create(path)?, raw)
}

/// Unnormalized joint density of screen position and partner condition on
/// the grid centres, as `x_m,density`. Conditioned files add up pointwise to
/// the unconditioned one.
pub fn write_pattern<W: Write>(
    out: W,
    geometry: &SlitGeometry,
    condition: Condition,
    grid: &ScreenGrid,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_m", "density"])?;
    for x in grid.centers() {
        w.write_record([x.to_string(), joint_density(geometry, condition, x).to_string()])?;
    }
    w.flush().map_err(|e| IoError::File {
        path: "<pattern>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_pattern_file(
    path: &FsPath,
    geometry: &SlitGeometry,
    condition: Condition,
    grid: &ScreenGrid,
) -> Result<(), IoError> {
    write_pattern(create(path)?, geometry, condition, grid)
}

/// Histogram of sampled positions on `grid`, as `x_m,count`.
pub fn write_histogram<W: Write>(out: W, grid: &ScreenGrid, hits: &[f64]) -> Result<(), IoError> {
    let mut counts = vec![0u64; grid.bins];
    for &x in hits {
        if let Some(i) = grid.bin_of(x) {
            counts[i] += 1;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_m", "count"])?;
    for (x, c) in grid.centers().into_iter().zip(counts) {
        w.write_record([x.to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| IoError::File {
        path: "<histogram>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_histogram_file(path: &FsPath, grid: &ScreenGrid, hits: &[f64]) -> Result<(), IoError> {
    write_histogram(create(path)?, grid, hits)
}

/// Screen runs: one row per pair, upper column `Screen`, hidden columns empty.
pub fn write_screen_hits<W: Write>(out: W, hits: &[ScreenHit], lower_basis: Basis) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTCOMES_HEADER)?;
    for h in hits {
        w.write_record([
            h.pair_id.to_string(),
            DetectorId::Screen.to_string(),
            h.lower.to_string(),
            lower_basis.to_string(),
            String::new(),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush().map_err(|e| IoError::File {
        path: "<outcomes>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_screen_hits_file(path: &FsPath, hits: &[ScreenHit], lower_basis: Basis) -> Result<(), IoError> {
    write_screen_hits(create(path)?, hits, lower_basis)
}

/// Table cells as `upper,lower,count`.
pub fn write_table<W: Write>(out: W, table: &JointTable) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["upper", "lower", "count"])?;
    for (&(u, l), &n) in &table.counts {
        w.write_record([u.to_string(), l.to_string(), n.to_string()])?;
    }
    w.flush().map_err(|e| IoError::File {
        path: "<table>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &FsPath, value: &T) -> Result<(), IoError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &FsPath) -> Result<T, IoError> {
    Ok(serde_json::from_reader(open(path)?)?)
}
