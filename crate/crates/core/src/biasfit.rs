//! Readout-bias analysis: the ones fraction expected under a calibration
//! model, chi-square goodness of fit of outcome histograms against the
//! modelled distribution, and the per-qubit and per-subset frequency tables.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::families::{CircuitSpec, FamilyId, GateChoice};
use crate::qcore::{CalibrationSnapshot, QubitId};
use crate::special;

/// Bins whose expected count falls below this are merged before testing.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum BiasError {
    #[error("no calibration entry for qubit {0}")]
    MissingCalibration(QubitId),
    #[error("spec has no qubits")]
    NoQubits,
    #[error("observed has {observed} bins but predicted has {predicted}")]
    BinMismatch { observed: usize, predicted: usize },
    #[error("observed counts sum to {sum}, expected {total}")]
    CountMismatch { sum: u64, total: u64 },
    #[error("predicted distribution sums to {0}")]
    NotNormalized(f64),
    #[error("every bin merged into one; no degrees of freedom left")]
    Degenerate,
    #[error("no results to summarise")]
    Empty,
    #[error("duplicate cell ({row}, {column})")]
    DuplicateCell { row: String, column: String },
}

fn readout_ones(calib: &CalibrationSnapshot, q: QubitId) -> Result<f64, BiasError> {
    let c = calib.get(q).ok_or(BiasError::MissingCalibration(q))?;
    Ok(0.5 - (c.p01 - c.p10) / 2.0)
}

/// Probability of reading `1` on a uniformly superposed qubit, averaged over
/// the qubits that feed the spec's default stream.
pub fn expected_ones_fraction(calib: &CalibrationSnapshot, spec: &CircuitSpec) -> Result<f64, BiasError> {
    expected_ones_fraction_with_bias(calib, spec, 0.0)
}

/// As [`expected_ones_fraction`], adding `extra_gate_bias` to the C4 and C5
/// predictions to account for the additional gates they apply before readout.
pub fn expected_ones_fraction_with_bias(
    calib: &CalibrationSnapshot,
    spec: &CircuitSpec,
    extra_gate_bias: f64,
) -> Result<f64, BiasError> {
    if spec.qubits.is_empty() {
        return Err(BiasError::NoQubits);
    }
    let mean_over = |qs: &[QubitId]| -> Result<f64, BiasError> {
        let mut s = 0.0;
        for &q in qs {
            s += readout_ones(calib, q)?;
        }
        Ok(s / qs.len() as f64)
    };
    match spec.family {
        FamilyId::C2 => match spec.select {
            Some(q) => readout_ones(calib, q),
            None => mean_over(&spec.qubits),
        },
        // Each GHZ qubit is |1> with probability 1/2, so its marginal is the
        // same expression; averaged over the active qubits.
        FamilyId::C3 => mean_over(&spec.qubits),
        FamilyId::C1 => readout_ones(calib, spec.qubits[0]),
        FamilyId::C4 | FamilyId::C5 => Ok(readout_ones(calib, spec.qubits[0])? + extra_gate_bias),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub chi2: f64,
    pub dof: usize,
    /// Upper-tail probability; underflows to 0 for extreme statistics.
    pub p_value: f64,
    /// `log10(p_value)`, finite even when `p_value` underflows.
    pub log10_p: f64,
}

impl FitResult {
    /// True when the p-value is too small to carry as an `f64`.
    pub fn is_extreme(&self) -> bool {
        self.log10_p < -300.0
    }

    /// Scientific notation built from `log10_p`, e.g. `1.51e-343`.
    pub fn p_display(&self) -> String {
        if !self.is_extreme() {
            return format!("{:.2e}", self.p_value);
        }
        let mut exp = self.log10_p.floor();
        let mut mant = 10f64.powf(self.log10_p - exp);
        if mant >= 9.995 {
            mant /= 10.0;
            exp += 1.0;
        }
        format!("{mant:.2}e{}", exp as i64)
    }
}

/// Pearson chi-square of `observed` counts against `predicted` probabilities
/// scaled to `total`. Bins with expected count below [`MIN_EXPECTED`] are
/// merged pairwise, smallest expected first, before the statistic is taken.
pub fn chi2_fit(observed: &[u64], predicted: &[f64], total: u64) -> Result<FitResult, BiasError> {
    if observed.len() != predicted.len() {
        return Err(BiasError::BinMismatch { observed: observed.len(), predicted: predicted.len() });
    }
    let sum: u64 = observed.iter().sum();
    if sum != total || total == 0 {
        return Err(BiasError::CountMismatch { sum, total });
    }
    let psum: f64 = predicted.iter().sum();
    if (psum - 1.0).abs() > 1e-9 || predicted.iter().any(|&p| p < 0.0) {
        return Err(BiasError::NotNormalized(psum));
    }
    let n = total as f64;
    let mut bins: Vec<(f64, u64)> = predicted.iter().map(|&p| p * n).zip(observed.iter().copied()).collect();
    let order = |a: &(f64, u64), b: &(f64, u64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    bins.sort_by(order);
    while bins.len() > 1 && bins[0].0 < MIN_EXPECTED {
        let (e1, o1) = bins.remove(0);
        let (e2, o2) = bins.remove(0);
        let merged = (e1 + e2, o1 + o2);
        let at = bins.partition_point(|b| order(b, &merged).is_lt());
        bins.insert(at, merged);
    }
    if bins.len() < 2 {
        return Err(BiasError::Degenerate);
    }
    let chi2: f64 = bins
        .iter()
        .map(|&(e, o)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = bins.len() - 1;
    let p_value = special::chi2_sf(chi2, dof as f64);
    let log10_p = if p_value > 1e-300 { p_value.log10() } else { special::chi2_log10_sf(chi2, dof as f64) };
    Ok(FitResult { chi2, dof, p_value, log10_p })
}

/// Row of a frequency table: a single qubit's stream, the interleaved
/// all-qubit C2 stream, or a GHZ subset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RowKey {
    Qubit(QubitId),
    Flatten,
    Subset(Vec<QubitId>),
}

impl RowKey {
    pub fn for_spec(spec: &CircuitSpec) -> RowKey {
        match spec.family {
            FamilyId::C3 => RowKey::Subset(spec.qubits.clone()),
            FamilyId::C2 => match spec.select {
                Some(q) => RowKey::Qubit(q),
                None => RowKey::Flatten,
            },
            _ => RowKey::Qubit(spec.qubits[0]),
        }
    }
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKey::Qubit(q) => write!(f, "{q}"),
            RowKey::Flatten => f.write_str("flatten"),
            RowKey::Subset(qs) => {
                let s: Vec<String> = qs.iter().map(|q| q.to_string()).collect();
                write!(f, "{{{}}}", s.join(","))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnKey {
    pub family: FamilyId,
    pub gate: GateChoice,
}

impl fmt::Display for ColumnKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family, self.gate)
    }
}

/// Ones fractions keyed by row and column, with population mean and SD along
/// both axes. Missing cells are excluded from the statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySummary {
    pub rows: Vec<RowKey>,
    pub columns: Vec<ColumnKey>,
    pub cells: Vec<Vec<Option<f64>>>,
    pub row_avg: Vec<f64>,
    pub row_sd: Vec<f64>,
    pub col_avg: Vec<f64>,
    pub col_sd: Vec<f64>,
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.clone().sum::<f64>() / n as f64;
    let v = xs.map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    (m, v.sqrt())
}

pub fn frequency_summary(results: &[(CircuitSpec, f64)]) -> Result<FrequencySummary, BiasError> {
    if results.is_empty() {
        return Err(BiasError::Empty);
    }
    let mut map: BTreeMap<(RowKey, ColumnKey), f64> = BTreeMap::new();
    for (spec, frac) in results {
        if spec.qubits.is_empty() {
            return Err(BiasError::NoQubits);
        }
        let row = RowKey::for_spec(spec);
        let col = ColumnKey { family: spec.family, gate: spec.gate };
        if map.insert((row.clone(), col), *frac).is_some() {
            return Err(BiasError::DuplicateCell { row: row.to_string(), column: col.to_string() });
        }
    }
    let mut rows: Vec<RowKey> = map.keys().map(|(r, _)| r.clone()).collect();
    rows.sort_by(|a, b| row_order(a).cmp(&row_order(b)));
    rows.dedup();
    let mut columns: Vec<ColumnKey> = map.keys().map(|(_, c)| *c).collect();
    columns.sort();
    columns.dedup();
    let cells: Vec<Vec<Option<f64>>> =
        rows.iter().map(|r| columns.iter().map(|c| map.get(&(r.clone(), *c)).copied()).collect()).collect();
    let (row_avg, row_sd) = cells.iter().map(|row| mean_sd(row.iter().flatten().copied())).unzip();
    let (col_avg, col_sd) =
        (0..columns.len()).map(|j| mean_sd(cells.iter().filter_map(move |row| row[j]))).unzip();
    Ok(FrequencySummary { rows, columns, cells, row_avg, row_sd, col_avg, col_sd })
}

// Qubit rows, then flatten, then subsets by size.
fn row_order(r: &RowKey) -> (u8, usize, Vec<QubitId>) {
    match r {
        RowKey::Qubit(q) => (0, 0, vec![*q]),
        RowKey::Flatten => (1, 0, Vec::new()),
        RowKey::Subset(qs) => (2, qs.len(), qs.clone()),
    }
}

fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{:.2}", 100.0 * v),
        _ => "NA".to_string(),
    }
}

fn pct_json(x: Option<f64>) -> Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        _ => Value::String("NA".into()),
    }
}

impl FrequencySummary {
    pub fn cell(&self, row: &RowKey, column: ColumnKey) -> Option<f64> {
        let i = self.rows.iter().position(|r| r == row)?;
        let j = self.columns.iter().position(|&c| c == column)?;
        self.cells[i][j]
    }

    /// Aligned text in percent: one row per key plus trailing Avg and SD
    /// rows, columns followed by Avg and SD.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Qubits".to_string()];
        header.extend(self.columns.iter().map(|c| c.to_string()));
        header.push("Avg".into());
        header.push("SD".into());
        let mut lines = vec![header];
        for (i, r) in self.rows.iter().enumerate() {
            let mut l = vec![r.to_string()];
            l.extend(self.cells[i].iter().map(|&c| pct(c)));
            l.push(pct(Some(self.row_avg[i])));
            l.push(pct(Some(self.row_sd[i])));
            lines.push(l);
        }
        let mut avg = vec!["Avg".to_string()];
        avg.extend(self.col_avg.iter().map(|&x| pct(Some(x))));
        let mut sd = vec!["SD".to_string()];
        sd.extend(self.col_sd.iter().map(|&x| pct(Some(x))));
        lines.push(avg);
        lines.push(sd);
        align(&lines)
    }

    pub fn to_json_value(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cells: serde_json::Map<String, Value> =
                    self.columns.iter().zip(&self.cells[i]).map(|(c, &v)| (c.to_string(), pct_json(v))).collect();
                json!({ "row": r.to_string(), "cells": cells,
                        "avg": pct_json(Some(self.row_avg[i])), "sd": pct_json(Some(self.row_sd[i])) })
            })
            .collect();
        let cols: Vec<String> = self.columns.iter().map(|c| c.to_string()).collect();
        let avg: Vec<Value> = self.col_avg.iter().map(|&x| pct_json(Some(x))).collect();
        let sd: Vec<Value> = self.col_sd.iter().map(|&x| pct_json(Some(x))).collect();
        json!({ "columns": cols, "rows": rows, "column_avg": avg, "column_sd": sd })
    }
}

fn align(lines: &[Vec<String>]) -> String {
    let width = lines.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut w = vec![0; width];
    for l in lines {
        for (j, c) in l.iter().enumerate() {
            w[j] = w[j].max(c.chars().count());
        }
    }
    let mut out = String::new();
    for l in lines {
        let cells: Vec<String> = l
            .iter()
            .enumerate()
            .map(|(j, c)| if j == 0 { format!("{c:<0$}", w[j]) } else { format!("{c:>0$}", w[j]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// One GHZ subset: observed ones fraction per gate, their mean, the model
/// expectation, and the histogram fit against the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub qubits: Vec<QubitId>,
    pub by_gate: [Option<f64>; 3],
    pub avg: f64,
    pub expected: f64,
    pub fit: Option<FitResult>,
}

/// Per-subset GHZ table with Avg and SD over rows for each numeric column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetTable {
    /// Every qubit that appears in some subset, for the membership marks.
    pub universe: Vec<QubitId>,
    pub rows: Vec<SubsetRow>,
}

/// Input for one C3 run: the spec, its raw ones fraction, and optionally the
/// outcome histogram together with the model distribution it is tested against.
#[derive(Clone, Debug)]
pub struct SubsetObservation {
    pub spec: CircuitSpec,
    pub ones_fraction: f64,
    pub histogram: Option<(Vec<u64>, Vec<f64>)>,
}

/// Builds the subset table. Histograms from the gates of one subset are
/// pooled before fitting, since the model does not depend on the gate.
pub fn subset_table(calib: &CalibrationSnapshot, obs: &[SubsetObservation]) -> Result<SubsetTable, BiasError> {
    if obs.is_empty() {
        return Err(BiasError::Empty);
    }
    let mut groups: BTreeMap<(usize, Vec<QubitId>), Vec<&SubsetObservation>> = BTreeMap::new();
    for o in obs {
        groups.entry((o.spec.qubits.len(), o.spec.qubits.clone())).or_default().push(o);
    }
    let mut universe = Vec::new();
    let mut rows = Vec::new();
    for ((_, qubits), group) in groups {
        let mut by_gate = [None; 3];
        let mut pooled: Option<(Vec<u64>, Vec<f64>)> = None;
        for o in &group {
            let g = GateChoice::ALL.iter().position(|&g| g == o.spec.gate).unwrap_or(0);
            if by_gate[g].replace(o.ones_fraction).is_some() {
                return Err(BiasError::DuplicateCell {
                    row: RowKey::Subset(qubits.clone()).to_string(),
                    column: o.spec.gate.to_string(),
                });
            }
            if let Some((h, p)) = &o.histogram {
                match &mut pooled {
                    None => pooled = Some((h.clone(), p.clone())),
                    Some((acc, _)) if acc.len() == h.len() => acc.iter_mut().zip(h).for_each(|(a, b)| *a += b),
                    Some((acc, _)) => {
                        return Err(BiasError::BinMismatch { observed: h.len(), predicted: acc.len() })
                    }
                }
            }
        }
        let (avg, _) = mean_sd(by_gate.iter().flatten().copied());
        let expected = expected_ones_fraction(calib, &group[0].spec)?;
        let fit = match pooled {
            Some((h, p)) => {
                let total = h.iter().sum();
                Some(chi2_fit(&h, &p, total)?)
            }
            None => None,
        };
        universe.extend(qubits.iter().copied());
        rows.push(SubsetRow { qubits, by_gate, avg, expected, fit });
    }
    universe.sort_unstable();
    universe.dedup();
    Ok(SubsetTable { universe, rows })
}

impl SubsetTable {
    /// Mean and population SD of the ones columns (H, Rx, Ry, Avg, Ex).
    pub fn column_stats(&self) -> [(f64, f64); 5] {
        let col = |f: &dyn Fn(&SubsetRow) -> Option<f64>| mean_sd(self.rows.iter().filter_map(f).collect::<Vec<_>>().into_iter());
        [
            col(&|r| r.by_gate[0]),
            col(&|r| r.by_gate[1]),
            col(&|r| r.by_gate[2]),
            col(&|r| Some(r.avg)),
            col(&|r| Some(r.expected)),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut header: Vec<String> = self.universe.iter().map(|q| q.to_string()).collect();
        for h in ["H", "Rx", "Ry", "Avg", "Ex", "chi2", "p-value"] {
            header.push(h.into());
        }
        let mut lines = vec![header];
        for r in &self.rows {
            let mut l: Vec<String> =
                self.universe.iter().map(|q| if r.qubits.contains(q) { "+" } else { "-" }.to_string()).collect();
            l.extend(r.by_gate.iter().map(|&x| pct(x)));
            l.push(pct(Some(r.avg)));
            l.push(pct(Some(r.expected)));
            match &r.fit {
                Some(f) => {
                    l.push(format!("{:.0}", f.chi2));
                    l.push(f.p_display());
                }
                None => l.extend(["NA".to_string(), "NA".to_string()]),
            }
            lines.push(l);
        }
        let stats = self.column_stats();
        for (name, pick) in [("Avg", 0usize), ("SD", 1)] {
            let mut l = vec![String::new(); self.universe.len()];
            if let Some(first) = l.first_mut() {
                *first = name.to_string();
            }
            l.extend(stats.iter().map(|s| pct(Some(if pick == 0 { s.0 } else { s.1 }))));
            lines.push(l);
        }
        align(&lines)
    }

    pub fn to_json_value(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "qubits": r.qubits,
                    "H": pct_json(r.by_gate[0]),
                    "Rx": pct_json(r.by_gate[1]),
                    "Ry": pct_json(r.by_gate[2]),
                    "Avg": pct_json(Some(r.avg)),
                    "Ex": pct_json(Some(r.expected)),
                    "chi2": r.fit.map_or(Value::String("NA".into()), |f| json!(f.chi2)),
                    "dof": r.fit.map_or(Value::Null, |f| json!(f.dof)),
                    "p_value": r.fit.map_or(Value::String("NA".into()), |f| json!(f.p_value)),
                    "log10_p": r.fit.map_or(Value::Null, |f| json!(f.log10_p)),
                })
            })
            .collect();
        let names = ["H", "Rx", "Ry", "Avg", "Ex"];
        let stats = self.column_stats();
        let avg: serde_json::Map<String, Value> =
            names.iter().zip(&stats).map(|(n, s)| (n.to_string(), pct_json(Some(s.0)))).collect();
        let sd: serde_json::Map<String, Value> =
            names.iter().zip(&stats).map(|(n, s)| (n.to_string(), pct_json(Some(s.1)))).collect();
        json!({ "universe": self.universe, "rows": rows, "avg": avg, "sd": sd })
    }
}
