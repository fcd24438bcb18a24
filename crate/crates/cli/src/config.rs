//! TOML run configuration. Every section and key is optional; unknown keys
//! are errors.

use std::path::PathBuf;

use eraser_core::analysis::{ModelPair, SweepOptions, SweepPoint};
use eraser_core::harness::{catalog, DetectorModel, DetectorPreset, Experiment, MeasurementConfig};
use eraser_core::models::{ModelKind, RetroPolicy};
use eraser_core::quantum::MeasurementOrder;
use eraser_core::screen::SlitGeometry;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub detector: DetectorSection,
    pub geometry: SlitGeometry,
    pub output: OutputSection,
    pub analysis: AnalysisSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub name: String,
    pub pairs: u64,
    pub seed: u64,
    pub order: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retro_policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub preset: Option<String>,
    pub efficiency: Option<f64>,
    pub dark_rate: Option<f64>,
    pub jitter_sigma: Option<f64>,
    pub coincidence_window: Option<f64>,
    pub pair_rate: Option<f64>,
    pub lower_delay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub alpha: f64,
    pub against: String,
    pub condition: String,
    pub true_coincidences_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub truth: String,
    pub rival: String,
    pub efficiencies: Vec<f64>,
    pub dark_rates: Vec<f64>,
    pub trials: usize,
    pub max_pairs: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            name: "E2".into(),
            pairs: 10_000,
            seed: 0,
            order: "upper-first".into(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: "qm".into(),
            retro_policy: None,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            alpha: 1e-6,
            against: "qm".into(),
            condition: "none".into(),
            true_coincidences_only: false,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            truth: "qm".into(),
            rival: "retro-strict".into(),
            efficiencies: vec![1.0, 0.8, 0.5, 0.2],
            dark_rates: vec![0.0, 100.0],
            trials: 200,
            max_pairs: 2_000,
        }
    }
}

/// Documented configuration keys: (key, type, default, description).
pub const KEYS: &[(&str, &str, &str, &str)] = &[
    ("experiment.name", "string", "\"E2\"", "Catalog experiment, E1 to E6"),
    ("experiment.pairs", "integer", "10000", "Pairs to emit, at least 1"),
    ("experiment.seed", "integer", "0", "Master seed; overridden by --seed"),
    ("experiment.order", "string", "\"upper-first\"", "Which photon collapses the state first: upper-first or lower-first"),
    ("model.kind", "string", "\"qm\"", "qm, ball, retro, retro-strict, retro-novikov or superdeterministic"),
    ("model.retro_policy", "string", "unset", "strict or novikov-uniform; only with kind = \"retro\""),
    ("detector.preset", "string", "\"ideal\"", "ideal, spad or mkid; the keys below override it"),
    ("detector.efficiency", "float", "preset", "Click probability per incident photon, in [0, 1]"),
    ("detector.dark_rate", "float", "preset", "Dark counts per second per detector"),
    ("detector.jitter_sigma", "float", "preset", "Gaussian timing jitter in seconds"),
    ("detector.coincidence_window", "float", "preset", "Coincidence half-window in seconds"),
    ("detector.pair_rate", "float", "10000", "Pair emission rate per second"),
    ("detector.lower_delay", "float", "5e-8", "Extra flight time of the lower photon in seconds"),
    ("geometry.slit_width", "float", "3e-5", "Slit width in metres (E6)"),
    ("geometry.slit_separation", "float", "1.5e-4", "Slit centre separation in metres (E6)"),
    ("geometry.wavelength", "float", "7e-7", "Down-converted wavelength in metres (E6)"),
    ("geometry.screen_distance", "float", "1.0", "Slit-to-screen distance in metres (E6)"),
    ("geometry.envelope_shift", "float", "0.0", "Lateral offset between the two single-slit envelopes in metres (E6)"),
    ("output.dir", "path", "\"out\"", "Output directory; overridden by --out"),
    ("analysis.alpha", "float", "1e-6", "Significance level"),
    ("analysis.against", "string", "\"qm\"", "Model whose table the chi-square test uses"),
    ("analysis.condition", "string", "\"none\"", "none, or no-d1 to drop rows with a D1 click"),
    ("analysis.true_coincidences_only", "bool", "false", "Drop accidental coincidences using ground truth (validation only)"),
    ("sweep.truth", "string", "\"qm\"", "Model generating the data"),
    ("sweep.rival", "string", "\"retro-strict\"", "Model to reject"),
    ("sweep.efficiencies", "float list", "[1.0, 0.8, 0.5, 0.2]", "Detector efficiencies to scan"),
    ("sweep.dark_rates", "float list", "[0.0, 100.0]", "Dark rates to scan"),
    ("sweep.trials", "integer", "200", "Trials per grid point"),
    ("sweep.max_pairs", "integer", "2000", "Pairs per trial before the trial counts as censored"),
];

/// Markdown reference of every configuration key.
pub fn reference_page() -> String {
    let mut out = String::from("# Configuration reference\n\nTOML file passed with `--config`. All keys are optional.\n");
    let mut section = "";
    for (key, ty, default, desc) in KEYS {
        let (sec, name) = key.split_once('.').expect("section.key");
        if sec != section {
            section = sec;
            out.push_str(&format!("\n## [{sec}]\n\n| key | type | default | meaning |\n|---|---|---|---|\n"));
        }
        out.push_str(&format!("| `{name}` | {ty} | {default} | {desc} |\n"));
    }
    out.push_str("\n## Detector presets\n\n| preset | efficiency | dark rate (1/s) | jitter (s) | window (s) |\n|---|---|---|---|---|\n");
    for p in DetectorPreset::ALL {
        let m = p.model();
        out.push_str(&format!(
            "| {} | {} | {} | {:e} | {:e} |\n",
            p.label(),
            m.efficiency,
            m.dark_rate,
            m.jitter_sigma,
            m.coincidence_window
        ));
    }
    out
}

/// A configuration problem, naming the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{key}: {msg}"))
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
}

pub fn parse_model(key: &str, kind: &str, policy: Option<&str>) -> Result<ModelKind, ConfigError> {
    let model: ModelKind = kind.parse().map_err(|e| bad(key, e))?;
    match (model, policy) {
        (_, None) => Ok(model),
        (ModelKind::Retrocausal(_), Some(p)) if kind.eq_ignore_ascii_case("retro") || kind.eq_ignore_ascii_case("retrocausal") => {
            let policy: RetroPolicy = p.parse().map_err(|e| bad("model.retro_policy", e))?;
            Ok(ModelKind::Retrocausal(policy))
        }
        _ => Err(bad("model.retro_policy", "only allowed with kind = \"retro\"")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowCondition {
    None,
    NoD1,
}

pub fn parse_condition(key: &str, s: &str) -> Result<RowCondition, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "none" | "" => Ok(RowCondition::None),
        "no-d1" | "no_d1" => Ok(RowCondition::NoD1),
        other => Err(bad(key, format!("unknown condition '{other}' (expected none or no-d1)"))),
    }
}

/// Configuration checked and converted to library types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: Experiment,
    pub config: MeasurementConfig,
    pub model: ModelKind,
    pub detector: DetectorModel,
    pub geometry: SlitGeometry,
    pub out_dir: PathBuf,
    pub alpha: f64,
    pub against: ModelKind,
    pub condition: RowCondition,
    pub true_only: bool,
}

impl RunConfig {
    pub fn detector_model(&self) -> Result<DetectorModel, ConfigError> {
        let d = &self.detector;
        let base = match &d.preset {
            Some(p) => p.parse::<DetectorPreset>().map_err(|e| bad("detector.preset", e))?.model(),
            None => DetectorModel::ideal(),
        };
        let m = DetectorModel {
            efficiency: d.efficiency.unwrap_or(base.efficiency),
            dark_rate: d.dark_rate.unwrap_or(base.dark_rate),
            jitter_sigma: d.jitter_sigma.unwrap_or(base.jitter_sigma),
            coincidence_window: d.coincidence_window.unwrap_or(base.coincidence_window),
            pair_rate: d.pair_rate.unwrap_or(base.pair_rate),
            lower_delay: d.lower_delay.unwrap_or(base.lower_delay),
        };
        m.validate().map_err(|e| bad("detector", e))?;
        Ok(m)
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let e = &self.experiment;
        let experiment: Experiment = e.name.parse().map_err(|m| bad("experiment.name", m))?;
        if e.pairs == 0 {
            return Err(bad("experiment.pairs", "must be at least 1"));
        }
        let order = match e.order.to_ascii_lowercase().as_str() {
            "upper-first" => MeasurementOrder::UpperFirst,
            "lower-first" => MeasurementOrder::LowerFirst,
            other => return Err(bad("experiment.order", format!("unknown order '{other}'"))),
        };
        let config = catalog(experiment).with_pairs(e.pairs).with_seed(e.seed).with_order(order);
        config.validate().map_err(|m| bad("experiment", m))?;
        let model = parse_model("model.kind", &self.model.kind, self.model.retro_policy.as_deref())?;
        let detector = self.detector_model()?;
        if config.screen {
            self.geometry.validate().map_err(|m| bad("geometry", m))?;
        }
        let a = &self.analysis;
        if !(a.alpha > 0.0 && a.alpha < 1.0) {
            return Err(bad("analysis.alpha", "must lie in (0, 1)"));
        }
        Ok(Resolved {
            experiment,
            config,
            model,
            detector,
            geometry: self.geometry,
            out_dir: self.output.dir.clone(),
            alpha: a.alpha,
            against: parse_model("analysis.against", &a.against, None)?,
            condition: parse_condition("analysis.condition", &a.condition)?,
            true_only: a.true_coincidences_only,
        })
    }

    pub fn sweep_plan(&self) -> Result<(ModelPair, Vec<SweepPoint>, SweepOptions), ConfigError> {
        let s = &self.sweep;
        let pair = ModelPair {
            truth: parse_model("sweep.truth", &s.truth, None)?,
            rival: parse_model("sweep.rival", &s.rival, None)?,
        };
        if s.efficiencies.is_empty() || s.dark_rates.is_empty() {
            return Err(bad("sweep", "efficiencies and dark_rates must be non-empty"));
        }
        if s.trials == 0 || s.max_pairs == 0 {
            return Err(bad("sweep", "trials and max_pairs must be positive"));
        }
        let base = self.detector_model()?;
        let mut grid = Vec::new();
        for &efficiency in &s.efficiencies {
            for &dark_rate in &s.dark_rates {
                let point = DetectorModel {
                    efficiency,
                    dark_rate,
                    ..base
                };
                point.validate().map_err(|m| bad("sweep", m))?;
                grid.push(SweepPoint { efficiency, dark_rate });
            }
        }
        let options = SweepOptions {
            trials: s.trials,
            max_pairs: s.max_pairs,
            seed: self.experiment.seed,
            base_detector: base,
            true_coincidences_only: self.analysis.true_coincidences_only,
        };
        Ok((pair, grid, options))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        let r = c.resolve().unwrap();
        assert_eq!(r.experiment, Experiment::E2);
        assert_eq!(r.model, ModelKind::QuantumMechanics);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[detector]\nefficency = 0.5\n").unwrap_err();
        assert!(err.0.contains("efficency"), "{err}");
        assert!(err.0.contains("line 2") || err.0.contains(":2:"), "{err}");
    }

    #[test]
    fn bad_values_name_their_key() {
        let c = parse("[experiment]\nname = \"E9\"\n").unwrap();
        assert!(c.resolve().unwrap_err().0.starts_with("experiment.name"));
        let c = parse("[model]\nkind = \"qm\"\nretro_policy = \"novikov\"\n").unwrap();
        assert!(c.resolve().unwrap_err().0.starts_with("model.retro_policy"));
        let c = parse("[detector]\nefficiency = 1.5\n").unwrap();
        assert!(c.resolve().unwrap_err().0.starts_with("detector"));
    }

    #[test]
    fn retro_policy_selects_variant() {
        let c = parse("[model]\nkind = \"retro\"\nretro_policy = \"novikov-uniform\"\n").unwrap();
        assert_eq!(c.resolve().unwrap().model, ModelKind::Retrocausal(RetroPolicy::NovikovUniform));
    }

    #[test]
    fn preset_with_override() {
        let c = parse("[detector]\npreset = \"spad\"\nefficiency = 0.9\n").unwrap();
        let d = c.detector_model().unwrap();
        assert_eq!(d.efficiency, 0.9);
        assert_eq!(d.dark_rate, 100.0);
    }

    #[test]
    fn reference_covers_every_key() {
        let mut full = RunConfig::default();
        full.model.retro_policy = Some("strict".into());
        full.detector = DetectorSection {
            preset: Some("ideal".into()),
            efficiency: Some(1.0),
            dark_rate: Some(0.0),
            jitter_sigma: Some(0.0),
            coincidence_window: Some(1e-9),
            pair_rate: Some(1e4),
            lower_delay: Some(5e-8),
        };
        let value = toml::Value::try_from(&full).unwrap();
        let mut keys = Vec::new();
        for (sec, table) in value.as_table().unwrap() {
            for key in table.as_table().unwrap().keys() {
                keys.push(format!("{sec}.{key}"));
            }
        }
        let documented: Vec<&str> = KEYS.iter().map(|k| k.0).collect();
        for k in &keys {
            assert!(documented.contains(&k.as_str()), "undocumented key {k}");
        }
        assert_eq!(keys.len(), documented.len());
    }
}
