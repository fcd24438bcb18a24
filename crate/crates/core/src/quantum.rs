//! Two-photon path-entangled state, eraser basis change and Born-rule
//! measurement.
//!
//! The joint state lives on the product basis {path 1, path 2} of the upper
//! photon times {path 1, path 2} of the lower photon. Every detector
//! arrangement is described by a set of real row functionals on one photon's
//! path space: an outcome's probability is the squared norm of the partner
//! vector obtained by contracting the joint amplitudes with that functional,
//! and the contracted vector (renormalized) is the partner's collapsed state.
//!
//! The eraser basis uses the real-sign convention
//! `E3 = (path1 + path2)/√2`, `E4 = (path1 - path2)/√2` on both sides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::sample_weighted;

/// Complex probability amplitude.
pub type Amplitude = Complex64;

/// Tolerance for checks that should hold in exact arithmetic.
pub const EXACT_TOL: f64 = 1e-12;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("basis {0} cannot be used on the upper side")]
    IllegalBasis(Basis),
    #[error("amplitudes are not finite")]
    NonFinite,
    #[error("state is not normalized (sum of |amp|^2 = {0})")]
    NotNormalized(f64),
}

/// One of the two spatial paths a photon can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Path {
    One,
    Two,
}

impl Path {
    pub const ALL: [Path; 2] = [Path::One, Path::Two];

    pub fn index(self) -> usize {
        match self {
            Path::One => 0,
            Path::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// Which photon of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Upper,
    Lower,
}

/// Detector arrangement on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Detectors directly on the two paths (which-way information).
    WhichWay,
    /// Paths recombined on a 50:50 splitter before the two port detectors.
    Eraser,
    /// Detector D1 absorbing path 1 in front of the eraser splitter.
    /// Only defined for the lower side.
    HybridD1,
}

/// Detector outcome on one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SideOutcome {
    P1,
    P2,
    E3,
    E4,
    D1Click,
}

/// Which photon is measured (and collapses the state) first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum MeasurementOrder {
    #[default]
    UpperFirst,
    LowerFirst,
}

impl Basis {
    /// Outcomes this arrangement can produce, in canonical order.
    pub fn outcomes(self) -> &'static [SideOutcome] {
        match self {
            Basis::WhichWay => &[SideOutcome::P1, SideOutcome::P2],
            Basis::Eraser => &[SideOutcome::E3, SideOutcome::E4],
            Basis::HybridD1 => &[SideOutcome::D1Click, SideOutcome::E3, SideOutcome::E4],
        }
    }

    pub fn is_legal_for(self, side: Side) -> bool {
        !(side == Side::Upper && self == Basis::HybridD1)
    }

    /// Row functional `<v|` on one photon's path space for `outcome`.
    ///
    /// The hybrid arrangement is a two-stage measurement: projection onto
    /// path 1 (D1 absorbs), otherwise the surviving path-2 component is sent
    /// through the eraser splitter. Its eraser functionals are therefore the
    /// eraser rows restricted to path 2.
    pub fn functional(self, outcome: SideOutcome) -> Option<[f64; 2]> {
        use SideOutcome::*;
        match (self, outcome) {
            (Basis::WhichWay, P1) => Some([1.0, 0.0]),
            (Basis::WhichWay, P2) => Some([0.0, 1.0]),
            (Basis::Eraser, E3) => Some([H, H]),
            (Basis::Eraser, E4) => Some([H, -H]),
            (Basis::HybridD1, D1Click) => Some([1.0, 0.0]),
            (Basis::HybridD1, E3) => Some([0.0, H]),
            (Basis::HybridD1, E4) => Some([0.0, -H]),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::WhichWay => "which-way",
            Basis::Eraser => "eraser",
            Basis::HybridD1 => "hybrid-d1",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "which-way" | "whichway" => Ok(Basis::WhichWay),
            "eraser" => Ok(Basis::Eraser),
            "hybrid-d1" | "hybridd1" | "hybrid" => Ok(Basis::HybridD1),
            other => Err(format!("unknown basis '{other}'")),
        }
    }
}

impl SideOutcome {
    pub const ALL: [SideOutcome; 5] = [
        SideOutcome::P1,
        SideOutcome::P2,
        SideOutcome::E3,
        SideOutcome::E4,
        SideOutcome::D1Click,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SideOutcome::P1 => "P1",
            SideOutcome::P2 => "P2",
            SideOutcome::E3 => "E3",
            SideOutcome::E4 => "E4",
            SideOutcome::D1Click => "D1Click",
        }
    }

    pub fn is_eraser_port(self) -> bool {
        matches!(self, SideOutcome::E3 | SideOutcome::E4)
    }
}

impl fmt::Display for SideOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SideOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SideOutcome::ALL
            .into_iter()
            .find(|o| o.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown outcome '{s}'"))
    }
}

/// Normalized state of one photon after its partner has been measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartnerState {
    amp: [Amplitude; 2],
}

impl PartnerState {
    pub fn new(amp: [Amplitude; 2]) -> Option<Self> {
        let norm = (amp[0].norm_sqr() + amp[1].norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return None;
        }
        Some(Self {
            amp: [amp[0] / norm, amp[1] / norm],
        })
    }

    pub fn amplitudes(&self) -> [Amplitude; 2] {
        self.amp
    }

    /// Outcome probabilities when this photon meets `basis`.
    pub fn outcome_probs(&self, basis: Basis) -> Vec<(SideOutcome, f64)> {
        basis
            .outcomes()
            .iter()
            .map(|&o| {
                let v = basis.functional(o).expect("outcome belongs to basis");
                (o, (self.amp[0] * v[0] + self.amp[1] * v[1]).norm_sqr())
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, basis: Basis, rng: &mut R) -> SideOutcome {
        let probs = self.outcome_probs(basis);
        let idx = sample_weighted(probs.iter().map(|p| p.1), rng);
        probs[idx].0
    }
}

/// Joint path state of one entangled pair, `amp[upper][lower]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    amp: [[Amplitude; 2]; 2],
}

impl JointState {
    pub fn new(amp: [[Amplitude; 2]; 2]) -> Result<Self, QuantumError> {
        if amp.iter().flatten().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(QuantumError::NonFinite);
        }
        let state = Self { amp };
        let n = state.norm_sqr();
        if (n - 1.0).abs() > EXACT_TOL {
            return Err(QuantumError::NotNormalized(n));
        }
        Ok(state)
    }

    /// Product state with the upper photon on `upper` and the lower on `lower`.
    pub fn basis_state(upper: Path, lower: Path) -> Self {
        let mut amp = [[Amplitude::new(0.0, 0.0); 2]; 2];
        amp[upper.index()][lower.index()] = Amplitude::new(1.0, 0.0);
        Self { amp }
    }

    pub fn amp(&self, upper: Path, lower: Path) -> Amplitude {
        self.amp[upper.index()][lower.index()]
    }

    pub fn amplitudes(&self) -> [[Amplitude; 2]; 2] {
        self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().flatten().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &JointState) -> Amplitude {
        self.amp
            .iter()
            .flatten()
            .zip(other.amp.iter().flatten())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Eraser splitter on one side: `[[1, 1], [1, -1]] / √2` acting on that
    /// photon's path index. After rotation, index 0 labels port 3 and index 1
    /// labels port 4.
    pub fn eraser_rotate(&self, side: Side) -> JointState {
        let a = &self.amp;
        let mut out = [[Amplitude::new(0.0, 0.0); 2]; 2];
        match side {
            Side::Upper => {
                for l in 0..2 {
                    out[0][l] = (a[0][l] + a[1][l]) * H;
                    out[1][l] = (a[0][l] - a[1][l]) * H;
                }
            }
            Side::Lower => {
                for u in 0..2 {
                    out[u][0] = (a[u][0] + a[u][1]) * H;
                    out[u][1] = (a[u][0] - a[u][1]) * H;
                }
            }
        }
        JointState { amp: out }
    }

    /// Contract `side` with `functional`, returning the unnormalized vector
    /// left on the other side.
    fn contract(&self, side: Side, functional: [f64; 2]) -> [Amplitude; 2] {
        let a = &self.amp;
        match side {
            Side::Upper => [
                a[0][0] * functional[0] + a[1][0] * functional[1],
                a[0][1] * functional[0] + a[1][1] * functional[1],
            ],
            Side::Lower => [
                a[0][0] * functional[0] + a[0][1] * functional[1],
                a[1][0] * functional[0] + a[1][1] * functional[1],
            ],
        }
    }

    /// Outcome probabilities for measuring only `side` in `basis`.
    pub fn side_marginal(
        &self,
        side: Side,
        basis: Basis,
    ) -> Result<Vec<(SideOutcome, f64)>, QuantumError> {
        if !basis.is_legal_for(side) {
            return Err(QuantumError::IllegalBasis(basis));
        }
        Ok(basis
            .outcomes()
            .iter()
            .map(|&o| {
                let v = self.contract(side, basis.functional(o).expect("outcome belongs to basis"));
                (o, v[0].norm_sqr() + v[1].norm_sqr())
            })
            .collect())
    }

    /// State of the partner photon after `side` registered `outcome` in
    /// `basis`. `None` when that outcome has zero probability or does not
    /// belong to the basis.
    pub fn collapse(&self, side: Side, basis: Basis, outcome: SideOutcome) -> Option<PartnerState> {
        let v = basis.functional(outcome)?;
        PartnerState::new(self.contract(side, v))
    }
}

/// `(|U1>|D1> + |U2>|D2>)/√2`.
pub fn make_entangled_state() -> JointState {
    let mut amp = [[Amplitude::new(0.0, 0.0); 2]; 2];
    amp[0][0] = Amplitude::new(H, 0.0);
    amp[1][1] = Amplitude::new(H, 0.0);
    JointState { amp }
}

pub fn eraser_rotate(state: &JointState, side: Side) -> JointState {
    state.eraser_rotate(side)
}

/// Joint outcome table keyed by `(upper, lower)`.
pub type OutcomeProbs = BTreeMap<(SideOutcome, SideOutcome), f64>;

/// Born-rule joint distribution for the given pair of arrangements. Every
/// combination of legal outcomes is present, zeros included.
pub fn joint_distribution(
    state: &JointState,
    upper_basis: Basis,
    lower_basis: Basis,
) -> Result<OutcomeProbs, QuantumError> {
    if !upper_basis.is_legal_for(Side::Upper) {
        return Err(QuantumError::IllegalBasis(upper_basis));
    }
    let mut table = OutcomeProbs::new();
    for &u in upper_basis.outcomes() {
        let fu = upper_basis.functional(u).expect("outcome belongs to basis");
        let partner = state.contract(Side::Upper, fu);
        for &l in lower_basis.outcomes() {
            let fl = lower_basis.functional(l).expect("outcome belongs to basis");
            let amp = partner[0] * fl[0] + partner[1] * fl[1];
            table.insert((u, l), amp.norm_sqr());
        }
    }
    Ok(table)
}

/// Measure both photons one after the other: sample the first side from its
/// marginal, collapse, then sample the partner from the conditional.
pub fn measure_sequential<R: Rng + ?Sized>(
    state: &JointState,
    order: MeasurementOrder,
    upper_basis: Basis,
    lower_basis: Basis,
    rng: &mut R,
) -> Result<(SideOutcome, SideOutcome), QuantumError> {
    if !upper_basis.is_legal_for(Side::Upper) {
        return Err(QuantumError::IllegalBasis(upper_basis));
    }
    let (first_side, first_basis, second_basis) = match order {
        MeasurementOrder::UpperFirst => (Side::Upper, upper_basis, lower_basis),
        MeasurementOrder::LowerFirst => (Side::Lower, lower_basis, upper_basis),
    };
    let (first, partner) = measure_side(state, first_side, first_basis, rng)?;
    let second = partner.sample(second_basis, rng);
    Ok(match order {
        MeasurementOrder::UpperFirst => (first, second),
        MeasurementOrder::LowerFirst => (second, first),
    })
}

/// Sample one side and return its outcome together with the collapsed partner.
pub fn measure_side<R: Rng + ?Sized>(
    state: &JointState,
    side: Side,
    basis: Basis,
    rng: &mut R,
) -> Result<(SideOutcome, PartnerState), QuantumError> {
    let marginal = state.side_marginal(side, basis)?;
    let idx = sample_weighted(marginal.iter().map(|p| p.1), rng);
    let outcome = marginal[idx].0;
    let partner = state
        .collapse(side, basis, outcome)
        .expect("sampled outcome has positive probability");
    Ok((outcome, partner))
}

/// Result of one photon through the bomb-tester interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BombOutcome {
    Explode,
    /// Constructive output port.
    DetectorBright,
    /// Port that is dark by destructive interference when the bomb is a dud.
    DetectorDark,
}

/// Exact outcome probabilities of a single photon in a Mach-Zehnder
/// interferometer with a bomb in arm 2. A live bomb measures which arm the
/// photon took; a dud leaves the interferometer intact.
pub fn bomb_probabilities(bomb_live: bool) -> [(BombOutcome, f64); 3] {
    let splitter = |a: [Amplitude; 2]| [(a[0] + a[1]) * H, (a[0] - a[1]) * H];
    let arms = splitter([Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0)]);
    let (p_explode, survivor) = if bomb_live {
        let p = arms[1].norm_sqr();
        let survivor = [arms[0], Amplitude::new(0.0, 0.0)];
        (p, survivor)
    } else {
        (0.0, arms)
    };
    let out = splitter(survivor);
    [
        (BombOutcome::Explode, p_explode),
        (BombOutcome::DetectorBright, out[0].norm_sqr()),
        (BombOutcome::DetectorDark, out[1].norm_sqr()),
    ]
}

pub fn bomb_test<R: Rng + ?Sized>(bomb_live: bool, rng: &mut R) -> BombOutcome {
    let probs = bomb_probabilities(bomb_live);
    probs[sample_weighted(probs.iter().map(|p| p.1), rng)].0
}
