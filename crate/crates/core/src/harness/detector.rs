use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::quantum::{Basis, Side, SideOutcome};

use super::HarnessError;

/// Physical detector positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorId {
    U1,
    U2,
    U3,
    U4,
    D1,
    D2,
    D3,
    D4,
    Screen,
}

impl DetectorId {
    pub const ALL: [DetectorId; 9] = [
        DetectorId::U1,
        DetectorId::U2,
        DetectorId::U3,
        DetectorId::U4,
        DetectorId::D1,
        DetectorId::D2,
        DetectorId::D3,
        DetectorId::D4,
        DetectorId::Screen,
    ];

    pub fn side(self) -> Side {
        match self {
            DetectorId::D1 | DetectorId::D2 | DetectorId::D3 | DetectorId::D4 => Side::Lower,
            _ => Side::Upper,
        }
    }

    /// Index used to key per-detector random streams.
    pub fn index(self) -> u64 {
        DetectorId::ALL.iter().position(|d| *d == self).expect("listed") as u64
    }

    /// Detector that fires for `outcome` on `side`.
    pub fn for_outcome(side: Side, outcome: SideOutcome) -> DetectorId {
        use SideOutcome::*;
        match (side, outcome) {
            (Side::Upper, P1) => DetectorId::U1,
            (Side::Upper, P2) => DetectorId::U2,
            (Side::Upper, E3) => DetectorId::U3,
            (Side::Upper, E4) => DetectorId::U4,
            (Side::Upper, D1Click) => unreachable!("no D1 on the upper side"),
            (Side::Lower, P1 | D1Click) => DetectorId::D1,
            (Side::Lower, P2) => DetectorId::D2,
            (Side::Lower, E3) => DetectorId::D3,
            (Side::Lower, E4) => DetectorId::D4,
        }
    }

    /// Outcome label of a click. D1 reads as a which-way result when the
    /// lower side is configured for which-way, otherwise as the hybrid D1
    /// absorption. Screen clicks have no outcome label.
    pub fn outcome(self, lower_basis: Basis) -> Option<SideOutcome> {
        use SideOutcome::*;
        Some(match self {
            DetectorId::U1 => P1,
            DetectorId::U2 => P2,
            DetectorId::U3 => E3,
            DetectorId::U4 => E4,
            DetectorId::D1 if lower_basis == Basis::WhichWay => P1,
            DetectorId::D1 => D1Click,
            DetectorId::D2 => P2,
            DetectorId::D3 => E3,
            DetectorId::D4 => E4,
            DetectorId::Screen => return None,
        })
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for DetectorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown detector '{s}'"))
    }
}

/// Detector imperfections and timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// Probability that an incident photon produces a click.
    pub efficiency: f64,
    /// Dark counts per second, per detector.
    pub dark_rate: f64,
    /// Gaussian timing jitter (s).
    pub jitter_sigma: f64,
    /// Half-width of the coincidence window (s).
    pub coincidence_window: f64,
    /// Pair emission rate (pairs/s).
    pub pair_rate: f64,
    /// Extra flight time of the lower photons (s).
    pub lower_delay: f64,
}

/// Named detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorPreset {
    Ideal,
    Spad,
    Mkid,
}

impl DetectorPreset {
    pub const ALL: [DetectorPreset; 3] = [DetectorPreset::Ideal, DetectorPreset::Spad, DetectorPreset::Mkid];

    pub fn label(self) -> &'static str {
        match self {
            DetectorPreset::Ideal => "ideal",
            DetectorPreset::Spad => "spad",
            DetectorPreset::Mkid => "mkid",
        }
    }

    pub fn model(self) -> DetectorModel {
        match self {
            DetectorPreset::Ideal => DetectorModel::ideal(),
            DetectorPreset::Spad => DetectorModel {
                efficiency: 0.5,
                dark_rate: 100.0,
                jitter_sigma: 50e-12,
                coincidence_window: 1e-9,
                ..DetectorModel::ideal()
            },
            DetectorPreset::Mkid => DetectorModel {
                efficiency: 0.8,
                dark_rate: 1.0,
                jitter_sigma: 100e-9,
                coincidence_window: 1e-6,
                ..DetectorModel::ideal()
            },
        }
    }
}

impl FromStr for DetectorPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectorPreset::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown detector preset '{s}' (expected ideal, spad or mkid)"))
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            jitter_sigma: 0.0,
            coincidence_window: 1e-9,
            pair_rate: 1e4,
            lower_delay: 50e-9,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidDetector(m.to_string()));
        if !(0.0..=1.0).contains(&self.efficiency) {
            return bad("efficiency must lie in [0, 1]");
        }
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return bad("dark rate must be finite and non-negative");
        }
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return bad("jitter must be finite and non-negative");
        }
        if !(self.coincidence_window.is_finite() && self.coincidence_window > 0.0) {
            return bad("coincidence window must be positive");
        }
        if !(self.pair_rate.is_finite() && self.pair_rate > 0.0) {
            return bad("pair rate must be positive");
        }
        if !(self.lower_delay.is_finite() && self.lower_delay >= 0.0) {
            return bad("lower delay must be finite and non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for p in DetectorPreset::ALL {
            p.model().validate().unwrap();
            assert_eq!(p.label().parse::<DetectorPreset>().unwrap(), p);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let d = DetectorModel { efficiency: 1.5, ..DetectorModel::ideal() };
        assert!(d.validate().is_err());
        let d = DetectorModel { coincidence_window: 0.0, ..DetectorModel::ideal() };
        assert!(d.validate().is_err());
        let d = DetectorModel { dark_rate: -1.0, ..DetectorModel::ideal() };
        assert!(d.validate().is_err());
    }

    #[test]
    fn detector_outcome_mapping() {
        for o in [SideOutcome::P1, SideOutcome::P2, SideOutcome::E3, SideOutcome::E4] {
            let d = DetectorId::for_outcome(Side::Upper, o);
            assert_eq!(d.outcome(Basis::Eraser), Some(o));
        }
        let d1 = DetectorId::for_outcome(Side::Lower, SideOutcome::D1Click);
        assert_eq!(d1.outcome(Basis::HybridD1), Some(SideOutcome::D1Click));
        assert_eq!(d1.outcome(Basis::Eraser), Some(SideOutcome::D1Click));
        assert_eq!(d1.outcome(Basis::WhichWay), Some(SideOutcome::P1));
        assert_eq!(DetectorId::Screen.outcome(Basis::Eraser), None);
    }
}
