//! SP 800-90B non-IID min-entropy estimation for binary sources: the ten
//! estimators and their minimum.

mod counting;
mod predictors;
mod tuples;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitStream;
use crate::par::{self, Exec};

pub use tuples::{lcp_array, suffix_array};

/// Upper-tail normal quantile for a 99 % one-sided bound.
pub(crate) const Z_99: f64 = 2.576;

/// Lengths below this trigger a warning flag in the report.
pub const RECOMMENDED_LENGTH: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    MostCommonValue,
    Collision,
    Markov,
    Compression,
    TTuple,
    LongestRepeatedSubstring,
    MultiMcw,
    LagPrediction,
    MultiMmc,
    Lz78y,
}

impl Estimator {
    pub const ALL: [Estimator; 10] = [
        Estimator::MostCommonValue,
        Estimator::Collision,
        Estimator::Markov,
        Estimator::Compression,
        Estimator::TTuple,
        Estimator::LongestRepeatedSubstring,
        Estimator::MultiMcw,
        Estimator::LagPrediction,
        Estimator::MultiMmc,
        Estimator::Lz78y,
    ];

    /// Report key.
    pub fn code(self) -> &'static str {
        match self {
            Estimator::MostCommonValue => "MCV",
            Estimator::Collision => "ClT",
            Estimator::Markov => "MrT",
            Estimator::Compression => "CmT",
            Estimator::TTuple => "TTT",
            Estimator::LongestRepeatedSubstring => "LRS",
            Estimator::MultiMcw => "MMCWT",
            Estimator::LagPrediction => "LPT",
            Estimator::MultiMmc => "MMMCT",
            Estimator::Lz78y => "LZ78Y",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Estimator {
    type Err = EntropyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.code().eq_ignore_ascii_case(s) || format!("{e:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| EntropyError::UnknownEstimator(s.to_string()))
    }
}

/// Min-entropy in bits per bit, or a marker that the estimator cannot run
/// on this input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Entropy {
    Value(f64),
    NotApplicable,
}

impl Entropy {
    pub fn value(self) -> Option<f64> {
        match self {
            Entropy::Value(h) => Some(h),
            Entropy::NotApplicable => None,
        }
    }

    /// `-log2(p)` scaled by `1 / bits`, clamped to `[0, 1]`.
    fn from_probability(p: f64, bits: f64) -> Entropy {
        let h = if p >= 1.0 { 0.0 } else { -p.log2() / bits };
        Entropy::Value(h.clamp(0.0, 1.0))
    }
}

impl Serialize for Entropy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Entropy::Value(h) => s.serialize_f64(*h),
            Entropy::NotApplicable => s.serialize_str("NA"),
        }
    }
}

impl<'de> Deserialize<'de> for Entropy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(h) => Ok(Entropy::Value(h)),
            Raw::Str(s) if s == "NA" => Ok(Entropy::NotApplicable),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad entropy value {s:?}"))),
        }
    }
}

impl fmt::Display for Entropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entropy::Value(h) => write!(f, "{h:.6}"),
            Entropy::NotApplicable => f.write_str("NA"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("empty bit stream")]
    Empty,
    #[error("no estimator is applicable to a stream of {0} bits")]
    NothingApplicable(usize),
    #[error("unknown estimator {0:?}")]
    UnknownEstimator(String),
}

/// Estimate min-entropy per bit with one estimator.
pub fn estimate(estimator: Estimator, stream: &BitStream) -> Result<Entropy, EntropyError> {
    if stream.is_empty() {
        return Err(EntropyError::Empty);
    }
    Ok(run(estimator, stream.bits()))
}

fn run(estimator: Estimator, s: &[u8]) -> Entropy {
    match estimator {
        Estimator::MostCommonValue => counting::most_common_value(s),
        Estimator::Collision => counting::collision(s),
        Estimator::Markov => counting::markov(s),
        Estimator::Compression => counting::compression(s),
        Estimator::TTuple => tuples::t_tuple(s),
        Estimator::LongestRepeatedSubstring => tuples::longest_repeated_substring(s),
        Estimator::MultiMcw => predictors::multi_mcw(s),
        Estimator::LagPrediction => predictors::lag(s),
        Estimator::MultiMmc => predictors::multi_mmc(s),
        Estimator::Lz78y => predictors::lz78y(s),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub n: usize,
    pub estimates: Vec<(Estimator, Entropy)>,
    pub h_original: f64,
    pub h_assessed: f64,
    pub min_entropy: f64,
    /// Set when `n` is below [`RECOMMENDED_LENGTH`].
    pub short_input: bool,
}

impl EntropyReport {
    pub fn get(&self, e: Estimator) -> Entropy {
        self.estimates.iter().find(|(k, _)| *k == e).map_or(Entropy::NotApplicable, |(_, v)| *v)
    }

    /// Flat key/value document: the ten estimator codes plus `hAs`, `hOr`
    /// and `minE`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (e, h) in &self.estimates {
            map.insert(e.code().to_string(), serde_json::to_value(h).expect("entropy serializes"));
        }
        map.insert("hAs".into(), self.h_assessed.into());
        map.insert("hOr".into(), self.h_original.into());
        map.insert("minE".into(), self.min_entropy.into());
        serde_json::Value::Object(map)
    }

    pub fn from_json_value(v: &serde_json::Value, n: usize) -> Option<EntropyReport> {
        let mut estimates = Vec::new();
        for e in Estimator::ALL {
            estimates.push((e, serde_json::from_value(v.get(e.code())?.clone()).ok()?));
        }
        Some(EntropyReport {
            n,
            estimates,
            h_original: v.get("hOr")?.as_f64()?,
            h_assessed: v.get("hAs")?.as_f64()?,
            min_entropy: v.get("minE")?.as_f64()?,
            short_input: n < RECOMMENDED_LENGTH,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("n = {}{}\n", self.n, if self.short_input { " (below recommended length)" } else { "" });
        for (e, h) in &self.estimates {
            out.push_str(&format!("{:<6} {}\n", e.code(), h));
        }
        out.push_str(&format!("hAs    {:.6}\nhOr    {:.6}\nminE   {:.6}\n", self.h_assessed, self.h_original, self.min_entropy));
        out
    }
}

pub fn min_entropy(stream: &BitStream) -> Result<EntropyReport, EntropyError> {
    min_entropy_with(stream, Exec::default())
}

/// Run all ten estimators and take the minimum over the applicable ones.
pub fn min_entropy_with(stream: &BitStream, exec: Exec) -> Result<EntropyReport, EntropyError> {
    if stream.is_empty() {
        return Err(EntropyError::Empty);
    }
    let s = stream.bits();
    let values = par::map_slice(exec, &Estimator::ALL, |&e| run(e, s));
    let estimates: Vec<(Estimator, Entropy)> = Estimator::ALL.into_iter().zip(values).collect();
    let min = estimates
        .iter()
        .filter_map(|(_, h)| h.value())
        .fold(None, |acc: Option<f64>, h| Some(acc.map_or(h, |a| a.min(h))))
        .ok_or(EntropyError::NothingApplicable(s.len()))?;
    Ok(EntropyReport {
        n: s.len(),
        estimates,
        h_original: min,
        h_assessed: min,
        min_entropy: min,
        short_input: s.len() < RECOMMENDED_LENGTH,
    })
}

/// Entropy from a predictor's record: `correct` hits out of `n` predictions
/// with longest run of hits `run`.
pub(crate) fn prediction_entropy(correct: usize, n: usize, run: usize) -> Entropy {
    if n < 2 {
        return Entropy::NotApplicable;
    }
    let nf = n as f64;
    let p_global = correct as f64 / nf;
    let p_global_upper = if correct == 0 {
        1.0 - 0.01f64.powf(1.0 / nf)
    } else {
        (p_global + Z_99 * (p_global * (1.0 - p_global) / (nf - 1.0)).sqrt()).min(1.0)
    };
    let p_local = local_bound(run + 1, n);
    Entropy::from_probability(p_global_upper.max(p_local).max(0.5), 1.0)
}

/// Per-prediction success probability at which a longest success run of
/// `r - 1` among `n` predictions has probability 0.99.
pub(crate) fn local_bound(r: usize, n: usize) -> f64 {
    let target = 0.99f64.ln();
    let ln_f = |p: f64| -> f64 {
        let q = 1.0 - p;
        let mut x = 1.0f64;
        for _ in 0..10 {
            x = 1.0 + q * p.powi(r as i32) * x.powi(r as i32 + 1);
        }
        let num = 1.0 - p * x;
        let den = (r as f64 + 1.0 - r as f64 * x) * q;
        if num <= 0.0 || den <= 0.0 {
            return f64::NEG_INFINITY;
        }
        num.ln() - den.ln() - (n as f64 + 1.0) * x.ln()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_roundtrip() {
        for e in Estimator::ALL {
            assert_eq!(e.code().parse::<Estimator>().unwrap(), e);
        }
    }

    #[test]
    fn local_bound_examples() {
        // A longest run of 20 is typical for 10^6 fair predictions, so the
        // bound stays below 1/2.
        let p = local_bound(21, 1_000_000);
        assert!(p > 0.35 && p < 0.5, "{p}");
        // Longer runs imply a higher success probability.
        assert!(local_bound(41, 1_000_000) > p);
    }

    #[test]
    fn constant_stream_report() {
        let r = min_entropy(&BitStream::from_bits(vec![1; 5000]).unwrap()).unwrap();
        assert_eq!(r.min_entropy, 0.0);
        assert_eq!(r.estimates.len(), 10);
        assert!(r.short_input);
        let v = r.to_json_value();
        assert_eq!(v.as_object().unwrap().len(), 13);
        assert_eq!(EntropyReport::from_json_value(&v, r.n).unwrap(), r);
    }

    #[test]
    fn empty_is_error() {
        let e = BitStream::from_bits(vec![]).unwrap();
        assert_eq!(min_entropy(&e), Err(EntropyError::Empty));
    }
}
