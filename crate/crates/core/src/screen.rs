//! Far-field double-slit patterns on the screen, conditioned on where the
//! partner photon was detected.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{Amplitude, Path};
use crate::sampling::CumulativeTable;

/// Default number of bins across the screen window (odd, so that x = 0 is a
/// bin center).
pub const DEFAULT_BINS: usize = 2049;

/// Minimum number of samples a visibility window must contain.
pub const MIN_WINDOW_SAMPLES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreenError {
    #[error("invalid slit geometry: {0}")]
    InvalidGeometry(String),
    #[error("visibility window of {window} m holds {samples} usable samples")]
    DegenerateWindow { window: f64, samples: usize },
    #[error("pattern has no positive mass")]
    EmptyPattern,
}

/// Double-slit geometry, all lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlitGeometry {
    pub slit_width: f64,
    pub slit_separation: f64,
    pub wavelength: f64,
    pub screen_distance: f64,
    /// Opposite lateral offsets of the two single-slit envelopes.
    pub envelope_shift: f64,
}

impl Default for SlitGeometry {
    fn default() -> Self {
        Self {
            slit_width: 30e-6,
            slit_separation: 150e-6,
            wavelength: 700e-9,
            screen_distance: 1.0,
            envelope_shift: 0.0,
        }
    }
}

impl SlitGeometry {
    pub fn validate(&self) -> Result<(), ScreenError> {
        let bad = |m: &str| Err(ScreenError::InvalidGeometry(m.to_string()));
        let all = [
            self.slit_width,
            self.slit_separation,
            self.wavelength,
            self.screen_distance,
            self.envelope_shift,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all lengths must be finite");
        }
        if self.slit_width <= 0.0 {
            return bad("slit width must be positive");
        }
        if self.slit_separation <= self.slit_width {
            return bad("slit separation must exceed slit width");
        }
        if self.wavelength <= 0.0 {
            return bad("wavelength must be positive");
        }
        if self.screen_distance <= 0.0 {
            return bad("screen distance must be positive");
        }
        Ok(())
    }

    /// Fraunhofer number d²/(λL) well below one.
    pub fn is_far_field(&self) -> bool {
        self.slit_separation * self.slit_separation / (self.wavelength * self.screen_distance) < 0.1
    }

    /// Interference fringe period λL/d.
    pub fn fringe_period(&self) -> f64 {
        self.wavelength * self.screen_distance / self.slit_separation
    }

    /// Position of the first single-slit envelope zero, λL/a.
    pub fn envelope_zero(&self) -> f64 {
        self.wavelength * self.screen_distance / self.slit_width
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Far-field amplitude at `x` from one slit: single-slit envelope times the
/// path phase, `sinc(π a x'/(λL)) · exp(±iπ d x/(λL))` with `x' = x ∓ shift`.
pub fn slit_amplitude(g: &SlitGeometry, x: f64, slit: Path) -> Amplitude {
    let scale = std::f64::consts::PI / (g.wavelength * g.screen_distance);
    let (xp, sign) = match slit {
        Path::One => (x - g.envelope_shift, 1.0),
        Path::Two => (x + g.envelope_shift, -1.0),
    };
    let envelope = sinc(scale * g.slit_width * xp);
    Complex64::from_polar(envelope, sign * scale * g.slit_separation * x)
}

/// Which partner detector the screen hits are sorted by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    OnD1,
    OnD2,
    OnD3,
    OnD4,
    NoCondition,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::OnD1,
        Condition::OnD2,
        Condition::OnD3,
        Condition::OnD4,
        Condition::NoCondition,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Condition::OnD1 => "on-d1",
            Condition::OnD2 => "on-d2",
            Condition::OnD3 => "on-d3",
            Condition::OnD4 => "on-d4",
            Condition::NoCondition => "none",
        }
    }

    /// Partner-detector branch as `(probability, normalized slit vector)`;
    /// `None` for the unconditioned (incoherent) mixture.
    fn branch(self) -> Option<(f64, [Amplitude; 2])> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |a: f64, b: f64| [Amplitude::new(a, 0.0), Amplitude::new(b, 0.0)];
        match self {
            Condition::OnD1 => Some((0.5, c(1.0, 0.0))),
            Condition::OnD2 => Some((0.5, c(0.0, 1.0))),
            Condition::OnD3 => Some((0.5, c(h, h))),
            Condition::OnD4 => Some((0.5, c(h, -h))),
            Condition::NoCondition => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase().replace('_', "-");
        match s.as_str() {
            "on-d1" | "d1" => Ok(Condition::OnD1),
            "on-d2" | "d2" => Ok(Condition::OnD2),
            "on-d3" | "d3" => Ok(Condition::OnD3),
            "on-d4" | "d4" => Ok(Condition::OnD4),
            "none" | "no-condition" | "pooled" => Ok(Condition::NoCondition),
            _ => Err(format!("unknown condition '{s}'")),
        }
    }
}

/// Screen intensity `|c1 ψ1(x) + c2 ψ2(x)|²` for a photon in slit state `c`.
pub fn slit_state_intensity(g: &SlitGeometry, slit_state: [Amplitude; 2], x: f64) -> f64 {
    (slit_state[0] * slit_amplitude(g, x, Path::One) + slit_state[1] * slit_amplitude(g, x, Path::Two))
        .norm_sqr()
}

/// Joint density of a screen hit at `x` together with the partner outcome
/// `condition` (the branch probability is folded in). With this weighting
/// the D3 and D4 densities add up to the unconditioned one, as do D1 and D2.
pub fn joint_density(g: &SlitGeometry, condition: Condition, x: f64) -> f64 {
    match condition.branch() {
        Some((weight, c)) => weight * slit_state_intensity(g, c, x),
        None => {
            0.5 * (slit_amplitude(g, x, Path::One).norm_sqr() + slit_amplitude(g, x, Path::Two).norm_sqr())
        }
    }
}

/// Uniform bins over `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenGrid {
    pub half_width: f64,
    pub bins: usize,
}

impl ScreenGrid {
    /// ±3 envelope zeros with [`DEFAULT_BINS`] bins.
    pub fn default_for(g: &SlitGeometry) -> Self {
        Self {
            half_width: 3.0 * g.envelope_zero(),
            bins: DEFAULT_BINS,
        }
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.half_width / self.bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.bins)
            .map(|k| -self.half_width + (k as f64 + 0.5) * w)
            .collect()
    }

    /// Bin holding `x`, if it falls inside the grid.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !(x >= -self.half_width && x < self.half_width) {
            return None;
        }
        let k = ((x + self.half_width) / self.bin_width()).floor() as usize;
        Some(k.min(self.bins - 1))
    }
}

/// Sampled screen intensity, normalized so that `Σ intensity·Δx = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenPattern {
    pub xs: Vec<f64>,
    pub intensity: Vec<f64>,
    pub bin_width: f64,
    /// Fringe-free reference on the same grid. When present, visibility is
    /// measured on `intensity / envelope`, which removes the slowly varying
    /// diffraction envelope from the contrast.
    pub envelope: Option<Vec<f64>>,
}

impl ScreenPattern {
    /// Normalizes `intensity`; fails if it has no positive mass.
    pub fn new(xs: Vec<f64>, intensity: Vec<f64>, bin_width: f64) -> Result<Self, ScreenError> {
        assert_eq!(xs.len(), intensity.len());
        let mass: f64 = intensity.iter().sum::<f64>() * bin_width;
        if !(mass.is_finite() && mass > 0.0) || intensity.iter().any(|v| *v < 0.0) {
            return Err(ScreenError::EmptyPattern);
        }
        Ok(Self {
            xs,
            intensity: intensity.into_iter().map(|v| v / mass).collect(),
            bin_width,
            envelope: None,
        })
    }

    pub fn with_envelope(mut self, envelope: Vec<f64>) -> Self {
        assert_eq!(envelope.len(), self.xs.len());
        self.envelope = Some(envelope);
        self
    }

    /// Histogram of screen hits as a density over `grid`; hits outside the
    /// grid are dropped.
    pub fn from_hits(hits: &[f64], grid: &ScreenGrid) -> Result<Self, ScreenError> {
        let mut counts = vec![0.0; grid.bins];
        for &x in hits {
            if let Some(k) = grid.bin_of(x) {
                counts[k] += 1.0;
            }
        }
        Self::new(grid.centers(), counts, grid.bin_width())
    }

    pub fn mass(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.bin_width
    }
}

/// Normalized pattern for `condition` on `grid`, carrying the unconditioned
/// pattern as its envelope reference.
pub fn conditioned_pattern_on(
    g: &SlitGeometry,
    condition: Condition,
    grid: &ScreenGrid,
) -> Result<ScreenPattern, ScreenError> {
    g.validate()?;
    let xs = grid.centers();
    let raw: Vec<f64> = xs.iter().map(|&x| joint_density(g, condition, x)).collect();
    let envelope: Vec<f64> = xs
        .iter()
        .map(|&x| joint_density(g, Condition::NoCondition, x))
        .collect();
    Ok(ScreenPattern::new(xs, raw, grid.bin_width())?.with_envelope(envelope))
}

pub fn conditioned_pattern(g: &SlitGeometry, condition: Condition) -> Result<ScreenPattern, ScreenError> {
    conditioned_pattern_on(g, condition, &ScreenGrid::default_for(g))
}

/// Fringe contrast `(Imax − Imin)/(Imax + Imin)` over the samples with
/// `|x| ≤ window/2`, taken on the envelope-divided pattern when the pattern
/// carries an envelope. Samples where the envelope vanishes are skipped.
pub fn visibility(p: &ScreenPattern, window: f64) -> Result<f64, ScreenError> {
    let half = window / 2.0;
    let env_max = p
        .envelope
        .as_ref()
        .map(|e| e.iter().cloned().fold(0.0, f64::max))
        .unwrap_or(1.0);
    let values: Vec<f64> = p
        .xs
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() <= half)
        .filter_map(|(i, _)| match &p.envelope {
            Some(e) if e[i] > 1e-9 * env_max => Some(p.intensity[i] / e[i]),
            Some(_) => None,
            None => Some(p.intensity[i]),
        })
        .collect();
    let degenerate = ScreenError::DegenerateWindow {
        window,
        samples: values.len(),
    };
    if values.len() < MIN_WINDOW_SAMPLES {
        return Err(degenerate);
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max + min <= 0.0 {
        return Err(degenerate);
    }
    Ok((max - min) / (max + min))
}

/// Inverse-CDF sampler over a pattern's bins; returns bin centers.
#[derive(Debug, Clone)]
pub struct ScreenSampler {
    xs: Vec<f64>,
    table: CumulativeTable,
}

impl ScreenSampler {
    pub fn new(p: &ScreenPattern) -> Result<Self, ScreenError> {
        let table = CumulativeTable::new(&p.intensity).ok_or(ScreenError::EmptyPattern)?;
        Ok(Self { xs: p.xs.clone(), table })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.xs[self.table.sample(rng)]
    }
}

/// One draw from `p`. Builds the CDF on every call; use [`ScreenSampler`]
/// for repeated draws.
pub fn sample_screen_position<R: Rng + ?Sized>(p: &ScreenPattern, rng: &mut R) -> Result<f64, ScreenError> {
    Ok(ScreenSampler::new(p)?.sample(rng))
}

/// Least-squares fringe contrast of a set of screen hits.
///
/// Hits within `|x| ≤ window/2` are binned at 16 bins per fringe period and
/// fitted as `E(x)·(A + B cos kx + C sin kx)` with `E` the fringe-free
/// envelope and `k = 2π/period`; the contrast is `√(B² + C²)/A`. Unlike
/// max/min on a histogram it is not inflated by counting noise, which makes
/// it the estimator of choice for finite samples.
pub fn fitted_visibility(hits: &[f64], g: &SlitGeometry, window: f64) -> Result<f64, ScreenError> {
    g.validate()?;
    let period = g.fringe_period();
    let bin = period / 16.0;
    let half_bins = ((window / 2.0) / bin).floor() as i64;
    if half_bins < 2 {
        return Err(ScreenError::DegenerateWindow { window, samples: 0 });
    }
    let nbins = (2 * half_bins + 1) as usize;
    let lo = -(half_bins as f64 + 0.5) * bin;
    let mut counts = vec![0.0f64; nbins];
    for &x in hits {
        let k = ((x - lo) / bin).floor();
        if k >= 0.0 && (k as usize) < nbins {
            counts[k as usize] += 1.0;
        }
    }
    let k_fringe = 2.0 * std::f64::consts::PI / period;
    // weighted normal equations for y = counts/E against [1, cos, sin],
    // weight E (Poisson variance of y is ∝ 1/E)
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    let env_max = (0..nbins)
        .map(|i| joint_density(g, Condition::NoCondition, lo + (i as f64 + 0.5) * bin))
        .fold(0.0, f64::max);
    let mut used = 0;
    for (i, &n) in counts.iter().enumerate() {
        let x = lo + (i as f64 + 0.5) * bin;
        let e = joint_density(g, Condition::NoCondition, x);
        if e <= 1e-6 * env_max {
            continue;
        }
        used += 1;
        let row = [1.0, (k_fringe * x).cos(), (k_fringe * x).sin()];
        let y = n / e;
        for r in 0..3 {
            atb[r] += e * row[r] * y;
            for c in 0..3 {
                ata[r][c] += e * row[r] * row[c];
            }
        }
    }
    let samples = counts.iter().sum::<f64>() as usize;
    if used < MIN_WINDOW_SAMPLES || samples == 0 {
        return Err(ScreenError::DegenerateWindow { window, samples });
    }
    let coef = solve3(ata, atb).ok_or(ScreenError::DegenerateWindow { window, samples })?;
    if coef[0] <= 0.0 {
        return Err(ScreenError::EmptyPattern);
    }
    Ok((coef[1].hypot(coef[2]) / coef[0]).min(1.0))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let d = det3(&a);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, slot) in out.iter_mut().enumerate() {
        let mut m = a;
        for r in 0..3 {
            m[r][col] = b[r];
        }
        *slot = det3(&m) / d;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream_rng;

    #[test]
    fn center_amplitudes_are_unit() {
        let g = SlitGeometry::default();
        for s in Path::ALL {
            let a = slit_amplitude(&g, 0.0, s);
            assert!((a - Amplitude::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn mirror_symmetry() {
        let g = SlitGeometry::default();
        for x in [1e-4, 2.3e-3, -7.7e-3, 0.05] {
            let a = slit_amplitude(&g, x, Path::One).norm();
            let b = slit_amplitude(&g, -x, Path::Two).norm();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn first_envelope_zero() {
        let g = SlitGeometry::default();
        let x0 = g.wavelength * g.screen_distance / g.slit_width;
        assert!(slit_amplitude(&g, x0, Path::One).norm() < 1e-12);
        assert!(slit_amplitude(&g, 0.9 * x0, Path::One).norm() > 1e-2);
    }

    #[test]
    fn d4_is_dark_and_d3_bright_at_center() {
        let g = SlitGeometry::default();
        assert!(joint_density(&g, Condition::OnD4, 0.0).abs() < 1e-12);
        let p3 = conditioned_pattern(&g, Condition::OnD3).unwrap();
        let mid = p3.xs.len() / 2;
        assert_eq!(p3.xs[mid], 0.0);
        let peak = p3.intensity.iter().cloned().fold(0.0, f64::max);
        assert_eq!(p3.intensity[mid], peak);
    }

    #[test]
    fn geometry_validation() {
        let mut g = SlitGeometry::default();
        assert!(g.validate().is_ok());
        assert!(g.is_far_field());
        g.slit_separation = g.slit_width;
        assert!(matches!(g.validate(), Err(ScreenError::InvalidGeometry(_))));
        let g = SlitGeometry { wavelength: -1.0, ..Default::default() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn visibility_needs_samples() {
        let g = SlitGeometry::default();
        let p = conditioned_pattern(&g, Condition::OnD3).unwrap();
        assert!(matches!(visibility(&p, 1e-6), Err(ScreenError::DegenerateWindow { .. })));
        assert!(visibility(&p, -1.0).is_err());
    }

    #[test]
    fn single_bin_pattern_samples_its_center() {
        let xs = vec![-1.0, 0.0, 1.0, 2.0];
        let p = ScreenPattern::new(xs, vec![0.0, 0.0, 3.0, 0.0], 1.0).unwrap();
        let mut rng = stream_rng(9, 0);
        for _ in 0..1000 {
            assert_eq!(sample_screen_position(&p, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn grid_bins() {
        let grid = ScreenGrid { half_width: 1.0, bins: 4 };
        assert_eq!(grid.centers(), vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(grid.bin_of(-1.0), Some(0));
        assert_eq!(grid.bin_of(0.99), Some(3));
        assert_eq!(grid.bin_of(1.0), None);
    }

    #[test]
    fn condition_labels_parse() {
        for c in Condition::ALL {
            assert_eq!(c.label().parse::<Condition>().unwrap(), c);
        }
    }
}
