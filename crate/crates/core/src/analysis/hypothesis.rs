use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::models::{ModelKind, ModelPrediction};
use crate::quantum::SideOutcome;

use super::{AnalysisError, JointTable};

/// Minimum expected count per cell before cells are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    FavorsQM,
    FavorsRival,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    #[serde(with = "extended_float")]
    pub statistic: f64,
    pub p_value: f64,
    /// `-inf` when the observations have zero likelihood.
    #[serde(with = "extended_float")]
    pub log_likelihood_ratio: f64,
    pub n_pairs: u64,
    pub verdict: Verdict,
}

/// JSON has no infinities; encode them (and NaN) as strings.
mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("invalid float '{other}'"))),
            },
        }
    }
}

/// Smallest `N` with `(1/2)^N ≤ alpha`.
pub fn pairs_to_significance(alpha: f64) -> Result<u32, AnalysisError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalysisError::InvalidAlpha(alpha));
    }
    let mut n = (-alpha.log2()).ceil().max(1.0) as u32;
    while 0.5f64.powi(n as i32) > alpha {
        n += 1;
    }
    while n > 1 && 0.5f64.powi(n as i32 - 1) <= alpha {
        n -= 1;
    }
    Ok(n)
}

/// Exact test of the feedback run against the strict retrocausal model.
///
/// The strict model allows only (E3, E3); quantum mechanics gives that cell
/// probability 1/2 per pair. For the longest all-(E3, E3) prefix of length
/// `N` the p-value under quantum mechanics is `(1/2)^N`. Any other outcome
/// has zero likelihood under the strict model: the log-likelihood ratio
/// (strict over quantum) becomes `-inf` and the verdict favors quantum
/// mechanics. An unbroken run favors the rival once `(1/2)^N ≤ alpha`.
pub fn sequence_test(outcomes: &[(SideOutcome, SideOutcome)], alpha: f64) -> TestReport {
    let prefix = outcomes
        .iter()
        .take_while(|o| **o == (SideOutcome::E3, SideOutcome::E3))
        .count();
    let broken = prefix < outcomes.len();
    let p_value = 0.5f64.powi(prefix.min(i32::MAX as usize) as i32);
    let (log_likelihood_ratio, verdict) = if outcomes.is_empty() {
        (0.0, Verdict::Inconclusive)
    } else if broken {
        (f64::NEG_INFINITY, Verdict::FavorsQM)
    } else if p_value <= alpha {
        (prefix as f64 * std::f64::consts::LN_2, Verdict::FavorsRival)
    } else {
        (prefix as f64 * std::f64::consts::LN_2, Verdict::Inconclusive)
    };
    TestReport {
        test_name: "sequence".into(),
        statistic: prefix as f64,
        p_value,
        log_likelihood_ratio,
        n_pairs: outcomes.len() as u64,
        verdict,
    }
}

/// Pearson goodness-of-fit of `table` against `predicted`.
///
/// Cells with expected count below [`MIN_EXPECTED`] are pooled, smallest
/// first. An observation in a cell the prediction forbids gives an infinite
/// statistic and p = 0. A prediction concentrated on a single cell that the
/// data respects gives p = 1. A rejection at level `alpha` favors quantum
/// mechanics unless quantum mechanics is the model being tested.
///
/// The log-likelihood ratio reported is that of the predicted multinomial
/// against the saturated (empirical) one, so it is at most zero.
pub fn chi_square_test(
    table: &JointTable,
    predicted: &ModelPrediction,
    alpha: f64,
) -> Result<TestReport, AnalysisError> {
    if table.total == 0 {
        return Err(AnalysisError::InsufficientData("empty table".into()));
    }
    let n = table.total as f64;
    let mut keys: Vec<(SideOutcome, SideOutcome)> = predicted.cells.keys().copied().collect();
    keys.extend(table.counts.keys().copied());
    keys.sort();
    keys.dedup();

    let rejected = if predicted.model == ModelKind::QuantumMechanics {
        Verdict::FavorsRival
    } else {
        Verdict::FavorsQM
    };
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut log_lr = 0.0;
    for k in keys {
        let observed = table.count(k.0, k.1) as f64;
        let expected = predicted.prob(k.0, k.1) * n;
        if expected <= 0.0 {
            if observed > 0.0 {
                return Ok(TestReport {
                    test_name: "chi-square".into(),
                    statistic: f64::INFINITY,
                    p_value: 0.0,
                    log_likelihood_ratio: f64::NEG_INFINITY,
                    n_pairs: table.total,
                    verdict: if 0.0 < alpha { rejected } else { Verdict::Inconclusive },
                });
            }
            continue;
        }
        if observed > 0.0 {
            log_lr -= observed * (observed / expected).ln();
        }
        cells.push((observed, expected));
    }

    cells.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (o, e) in &cells {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= MIN_EXPECTED {
            groups.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => groups.push(acc),
        }
    }

    let (statistic, p_value) = if groups.len() >= 2 {
        let stat: f64 = groups.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
        let dof = (groups.len() - 1) as f64;
        let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
        (stat, dist.sf(stat).clamp(0.0, 1.0))
    } else if cells.len() == 1 {
        (0.0, 1.0)
    } else {
        return Err(AnalysisError::InsufficientData(format!(
            "{} pairs leave fewer than two cells with expected count >= {MIN_EXPECTED}",
            table.total
        )));
    };

    Ok(TestReport {
        test_name: "chi-square".into(),
        statistic,
        p_value,
        log_likelihood_ratio: log_lr,
        n_pairs: table.total,
        verdict: if p_value < alpha { rejected } else { Verdict::Inconclusive },
    })
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `samples` against the continuous `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    }
}

/// KS test against the uniform distribution on [0, 1].
pub fn ks_uniform(samples: &[f64]) -> KsResult {
    ks_test(samples, |x| x.clamp(0.0, 1.0))
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
