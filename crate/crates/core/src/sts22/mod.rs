//! SP 800-22 statistical test battery: 15 test families expanding to 188
//! subtests with the default parameters, plus the proportion-of-passes and
//! p-value uniformity aggregations used across many sequences.

mod basic;
mod complexity;
mod excursions;
mod rank;
mod serial;
mod spectral;
mod templates;
mod universal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitStream;
use crate::par::{self, Exec};
use crate::special;

pub use complexity::berlekamp_massey;
pub use templates::aperiodic_templates;
pub use universal::universal_defaults;

/// The fifteen test families, in canonical report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestFamily {
    Frequency,
    BlockFrequency,
    CumulativeSums,
    Runs,
    LongestRun,
    Rank,
    Spectral,
    NonOverlappingTemplate,
    OverlappingTemplate,
    Universal,
    ApproximateEntropy,
    RandomExcursions,
    RandomExcursionsVariant,
    Serial,
    LinearComplexity,
}

impl TestFamily {
    pub const ALL: [TestFamily; 15] = [
        TestFamily::Frequency,
        TestFamily::BlockFrequency,
        TestFamily::CumulativeSums,
        TestFamily::Runs,
        TestFamily::LongestRun,
        TestFamily::Rank,
        TestFamily::Spectral,
        TestFamily::NonOverlappingTemplate,
        TestFamily::OverlappingTemplate,
        TestFamily::Universal,
        TestFamily::ApproximateEntropy,
        TestFamily::RandomExcursions,
        TestFamily::RandomExcursionsVariant,
        TestFamily::Serial,
        TestFamily::LinearComplexity,
    ];

    /// Short column code used in heatmap tables.
    pub fn code(self) -> &'static str {
        match self {
            TestFamily::Frequency => "Freq",
            TestFamily::BlockFrequency => "BF",
            TestFamily::CumulativeSums => "CS",
            TestFamily::Runs => "Rns",
            TestFamily::LongestRun => "LR",
            TestFamily::Rank => "Rnk",
            TestFamily::Spectral => "FFT",
            TestFamily::NonOverlappingTemplate => "NOT",
            TestFamily::OverlappingTemplate => "OT",
            TestFamily::Universal => "Unv",
            TestFamily::ApproximateEntropy => "AE",
            TestFamily::RandomExcursions => "RE",
            TestFamily::RandomExcursionsVariant => "REV",
            TestFamily::Serial => "Srl",
            TestFamily::LinearComplexity => "LC",
        }
    }

    /// Number of subtests the family reports under `params`.
    pub fn subtest_count(self, params: &Sts22Params) -> usize {
        match self {
            TestFamily::CumulativeSums | TestFamily::Serial => 2,
            TestFamily::NonOverlappingTemplate => {
                aperiodic_templates(params.nonoverlapping_m.clamp(2, templates::MAX_M)).len()
            }
            TestFamily::RandomExcursions => excursions::RE_STATES.len(),
            TestFamily::RandomExcursionsVariant => excursions::REV_STATES.len(),
            _ => 1,
        }
    }

    fn labels(self, params: &Sts22Params) -> Vec<String> {
        match self {
            TestFamily::CumulativeSums => vec!["forward".into(), "reverse".into()],
            TestFamily::Serial => vec!["p1".into(), "p2".into()],
            TestFamily::NonOverlappingTemplate => {
                let m = params.nonoverlapping_m.clamp(2, templates::MAX_M);
                aperiodic_templates(m).iter().map(|&t| format!("{t:0m$b}")).collect()
            }
            TestFamily::RandomExcursions => excursions::RE_STATES.iter().map(|x| format!("x={x}")).collect(),
            TestFamily::RandomExcursionsVariant => excursions::REV_STATES.iter().map(|x| format!("x={x}")).collect(),
            _ => vec![String::new()],
        }
    }
}

impl fmt::Display for TestFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TestFamily {
    type Err = Sts22Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TestFamily::ALL
            .into_iter()
            .find(|f| f.code().eq_ignore_ascii_case(s) || format!("{f:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| Sts22Error::UnknownFamily(s.to_string()))
    }
}

/// A subtest outcome: a probability, or a marker that the test does not
/// apply to this sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PValue {
    Value(f64),
    NotApplicable,
}

impl PValue {
    pub fn value(self) -> Option<f64> {
        match self {
            PValue::Value(p) => Some(p),
            PValue::NotApplicable => None,
        }
    }

    pub fn is_applicable(self) -> bool {
        matches!(self, PValue::Value(_))
    }

    fn clamped(p: f64) -> PValue {
        PValue::Value(if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) })
    }
}

impl Serialize for PValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PValue::Value(p) => s.serialize_f64(round6(*p)),
            PValue::NotApplicable => s.serialize_str("NA"),
        }
    }
}

impl<'de> Deserialize<'de> for PValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(PValue::Value(p)),
            Raw::Str(s) if s == "NA" => Ok(PValue::NotApplicable),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad p-value {s:?}"))),
        }
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Value(p) => write!(f, "{p:.6}"),
            PValue::NotApplicable => f.write_str("NA"),
        }
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// One p-value together with the statistic it was derived from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub p_value: PValue,
    pub statistic: f64,
}

impl Outcome {
    fn new(p: f64, statistic: f64) -> Outcome {
        Outcome { p_value: PValue::clamped(p), statistic }
    }

    fn na() -> Outcome {
        Outcome { p_value: PValue::NotApplicable, statistic: f64::NAN }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtestResult {
    pub family: TestFamily,
    pub index: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    pub p_value: PValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sts22Report {
    pub n: usize,
    pub results: Vec<SubtestResult>,
}

impl Sts22Report {
    pub fn family(&self, family: TestFamily) -> impl Iterator<Item = &SubtestResult> {
        self.results.iter().filter(move |r| r.family == family)
    }

    pub fn p_values(&self, family: TestFamily) -> Vec<PValue> {
        self.family(family).map(|r| r.p_value).collect()
    }

    /// Column key for a subtest, e.g. `NOT/000000001` or `CS/forward`.
    pub fn column_key(r: &SubtestResult) -> String {
        if r.label.is_empty() {
            r.family.code().to_string()
        } else {
            format!("{}/{}", r.family.code(), r.label)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table, one subtest per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("n = {}\n{:<22} {:>10} {:>14}\n", self.n, "subtest", "p-value", "statistic");
        for r in &self.results {
            let stat = r.statistic.map_or("-".to_string(), |s| format!("{s:.6}"));
            out.push_str(&format!("{:<22} {:>10} {:>14}\n", Self::column_key(r), r.p_value.to_string(), stat));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum Sts22Error {
    #[error("empty bit stream")]
    Empty,
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParams { name: &'static str, value: usize, reason: &'static str },
    #[error("unknown test family {0:?}")]
    UnknownFamily(String),
    #[error("no sequences to aggregate")]
    NoSequences,
    #[error("significance level must lie in (0, 1), got {0}")]
    BadAlpha(f64),
}

/// Battery parameters. `None` for the universal-test fields selects the
/// block length and initialization size from `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sts22Params {
    pub block_frequency_m: usize,
    pub nonoverlapping_m: usize,
    pub overlapping_m: usize,
    pub universal_l: Option<usize>,
    pub universal_q: Option<usize>,
    pub approx_entropy_m: usize,
    pub serial_m: usize,
    pub linear_complexity_m: usize,
}

impl Default for Sts22Params {
    fn default() -> Self {
        Sts22Params {
            block_frequency_m: 128,
            nonoverlapping_m: 9,
            overlapping_m: 9,
            universal_l: None,
            universal_q: None,
            approx_entropy_m: 10,
            serial_m: 16,
            linear_complexity_m: 500,
        }
    }
}

impl Sts22Params {
    /// Structural checks that do not depend on the stream length.
    pub fn validate(&self) -> Result<(), Sts22Error> {
        let bad = |name, value, reason| Err(Sts22Error::InvalidParams { name, value, reason });
        if self.block_frequency_m == 0 {
            return bad("block_frequency_m", 0, "must be positive");
        }
        if !(2..=templates::MAX_M).contains(&self.nonoverlapping_m) {
            return bad("nonoverlapping_m", self.nonoverlapping_m, "supported range is 2..=16");
        }
        if self.overlapping_m != 9 {
            return bad("overlapping_m", self.overlapping_m, "class probabilities are tabulated for m = 9 only");
        }
        if let Some(l) = self.universal_l {
            if !(6..=16).contains(&l) {
                return bad("universal_l", l, "supported range is 6..=16");
            }
        }
        if let Some(q) = self.universal_q {
            if q == 0 {
                return bad("universal_q", q, "must be positive");
            }
        }
        if self.approx_entropy_m > 24 {
            return bad("approx_entropy_m", self.approx_entropy_m, "at most 24");
        }
        if !(2..=24).contains(&self.serial_m) {
            return bad("serial_m", self.serial_m, "supported range is 2..=24");
        }
        if self.linear_complexity_m < 2 {
            return bad("linear_complexity_m", self.linear_complexity_m, "must be at least 2");
        }
        Ok(())
    }
}

/// Run one test family. Returns one outcome per subtest; all of them are
/// `NotApplicable` when `n` is below the family's applicability threshold.
pub fn run_test(family: TestFamily, stream: &BitStream, params: &Sts22Params) -> Result<Vec<Outcome>, Sts22Error> {
    if stream.is_empty() {
        return Err(Sts22Error::Empty);
    }
    params.validate()?;
    Ok(run_unchecked(family, stream.bits(), params))
}

/// As [`run_test`], but frequency, block frequency, cumulative sums and runs
/// skip their minimum-length rule. Meant for short worked examples; the
/// other families keep their applicability rules.
pub fn run_test_any_length(
    family: TestFamily,
    stream: &BitStream,
    params: &Sts22Params,
) -> Result<Vec<Outcome>, Sts22Error> {
    if stream.is_empty() {
        return Err(Sts22Error::Empty);
    }
    params.validate()?;
    let eps = stream.bits();
    Ok(match family {
        TestFamily::Frequency => vec![basic::frequency_raw(eps)],
        TestFamily::BlockFrequency if eps.len() >= params.block_frequency_m => {
            vec![basic::block_frequency_raw(eps, params.block_frequency_m)]
        }
        TestFamily::CumulativeSums => basic::cumulative_sums_raw(eps).to_vec(),
        TestFamily::Runs => vec![basic::runs_raw(eps)],
        _ => run_unchecked(family, eps, params),
    })
}

fn run_unchecked(family: TestFamily, eps: &[u8], params: &Sts22Params) -> Vec<Outcome> {
    match family {
        TestFamily::Frequency => vec![basic::frequency(eps)],
        TestFamily::BlockFrequency => vec![basic::block_frequency(eps, params.block_frequency_m)],
        TestFamily::CumulativeSums => basic::cumulative_sums(eps).to_vec(),
        TestFamily::Runs => vec![basic::runs(eps)],
        TestFamily::LongestRun => vec![basic::longest_run(eps)],
        TestFamily::Rank => vec![rank::rank(eps)],
        TestFamily::Spectral => vec![spectral::spectral(eps)],
        TestFamily::NonOverlappingTemplate => templates::non_overlapping(eps, params.nonoverlapping_m),
        TestFamily::OverlappingTemplate => vec![templates::overlapping(eps, params.overlapping_m)],
        TestFamily::Universal => vec![universal::universal(eps, params.universal_l, params.universal_q)],
        TestFamily::ApproximateEntropy => vec![serial::approximate_entropy(eps, params.approx_entropy_m)],
        TestFamily::RandomExcursions => excursions::random_excursions(eps),
        TestFamily::RandomExcursionsVariant => excursions::random_excursions_variant(eps),
        TestFamily::Serial => serial::serial(eps, params.serial_m).to_vec(),
        TestFamily::LinearComplexity => vec![complexity::linear_complexity(eps, params.linear_complexity_m)],
    }
}

pub fn run_battery(stream: &BitStream, params: &Sts22Params) -> Result<Sts22Report, Sts22Error> {
    run_battery_with(stream, params, Exec::default())
}

/// Run all fifteen families. Families are evaluated independently (in
/// parallel under [`Exec::Parallel`]) and assembled in canonical order.
pub fn run_battery_with(stream: &BitStream, params: &Sts22Params, exec: Exec) -> Result<Sts22Report, Sts22Error> {
    if stream.is_empty() {
        return Err(Sts22Error::Empty);
    }
    params.validate()?;
    let eps = stream.bits();
    let per_family = par::map_slice(exec, &TestFamily::ALL, |&f| run_unchecked(f, eps, params));
    let mut results = Vec::new();
    for (family, outcomes) in TestFamily::ALL.into_iter().zip(per_family) {
        let labels = family.labels(params);
        debug_assert_eq!(labels.len(), outcomes.len());
        for (index, (o, label)) in outcomes.into_iter().zip(labels).enumerate() {
            results.push(SubtestResult {
                family,
                index,
                label,
                p_value: o.p_value,
                statistic: o.statistic.is_finite().then_some(o.statistic),
            });
        }
    }
    Ok(Sts22Report { n: eps.len(), results })
}

/// Proportion-of-passes check for one subtest across many sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionResult {
    pub passed: usize,
    pub sequences: usize,
    pub threshold: usize,
    /// The threshold obtained by rounding down instead of up; this is the
    /// commonly quoted "52 of 55" figure.
    pub floor_threshold: usize,
    pub pass: bool,
}

/// `p_values` holds one entry per sequence; inapplicable entries count as
/// sequences that did not pass.
pub fn proportion_pass(p_values: &[PValue], alpha: f64, sequences: usize) -> Result<ProportionResult, Sts22Error> {
    if sequences == 0 {
        return Err(Sts22Error::NoSequences);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Sts22Error::BadAlpha(alpha));
    }
    let passed = p_values.iter().filter(|p| p.value().is_some_and(|v| v >= alpha)).count();
    let s = sequences as f64;
    let bound = s * ((1.0 - alpha) - 3.0 * (alpha * (1.0 - alpha) / s).sqrt());
    let threshold = bound.ceil().max(0.0) as usize;
    let floor_threshold = bound.floor().max(0.0) as usize;
    Ok(ProportionResult { passed, sequences, threshold, floor_threshold, pass: passed >= threshold })
}

/// Uniformity of p-values over ten equal-width buckets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityResult {
    pub buckets: [usize; 10],
    pub chi2: f64,
    pub p_value: f64,
    /// `log10` of the p-value, finite even when the p-value underflows.
    pub log10_p: f64,
    pub pass: bool,
    /// Set when fewer than 55 p-values were supplied.
    pub too_few: bool,
}

pub const UNIFORMITY_THRESHOLD: f64 = 1e-4;
pub const MIN_SEQUENCES: usize = 55;

pub fn uniformity(p_values: &[PValue]) -> Result<UniformityResult, Sts22Error> {
    let values: Vec<f64> = p_values.iter().filter_map(|p| p.value()).filter(|v| v.is_finite()).collect();
    if values.is_empty() {
        return Err(Sts22Error::NoSequences);
    }
    let mut buckets = [0usize; 10];
    for v in &values {
        let idx = ((v * 10.0) as usize).min(9);
        buckets[idx] += 1;
    }
    let expected = values.len() as f64 / 10.0;
    let chi2: f64 = buckets.iter().map(|&b| (b as f64 - expected).powi(2) / expected).sum();
    let p_value = special::igamc(4.5, chi2 / 2.0);
    Ok(UniformityResult {
        buckets,
        chi2,
        p_value,
        log10_p: special::chi2_log10_sf(chi2, 9.0),
        pass: p_value >= UNIFORMITY_THRESHOLD,
        too_few: values.len() < MIN_SEQUENCES,
    })
}
