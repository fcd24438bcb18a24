//! Seeded random streams and discrete sampling.
//!
//! Every simulated unit of work (a pair, a detector's dark-count process, a
//! sweep trial) draws from its own ChaCha stream keyed by `(seed, stream id)`,
//! so results do not depend on how work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive an independent seed from a parent seed and a label (splitmix64).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw an index with probability proportional to its weight.
///
/// Zero-weight entries are never returned. Panics if the weights do not
/// have a positive finite sum.
pub fn sample_weighted<I, R>(weights: I, rng: &mut R) -> usize
where
    I: IntoIterator<Item = f64>,
    R: Rng + ?Sized,
{
    let weights: Vec<f64> = weights.into_iter().collect();
    let total: f64 = weights.iter().sum();
    assert!(total.is_finite() && total > 0.0, "weights must have a positive sum");
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Cumulative table for repeated inverse-CDF draws over bins.
#[derive(Debug, Clone)]
pub struct CumulativeTable {
    cdf: Vec<f64>,
}

impl CumulativeTable {
    /// `None` if the weights have no positive mass or contain negatives.
    pub fn new(weights: &[f64]) -> Option<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return None;
        }
        let mut acc = 0.0;
        let cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        (acc > 0.0).then_some(Self { cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty");
        let target = rng.random::<f64>() * total;
        // first bin whose cumulative mass exceeds the target; zero-mass bins
        // share their predecessor's cumulative value and are skipped
        self.cdf.partition_point(|&c| c <= target).min(self.cdf.len() - 1)
    }
}
