use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{write_atomic, HarnessError, ManifestEntry, RunManifest};
use crate::biasfit::{self, FrequencySummary, SubsetObservation, SubsetTable};
use crate::bits::{self, BitStream};
use crate::ent90b::{self, EntropyReport, Estimator};
use crate::families::{self, CircuitSpec, FamilyId};
use crate::par::{self, Exec};
use crate::qcore::Topology;
use crate::simnoise::{self, NoiseProfile};
use crate::sts22::{self, Sts22Params, Sts22Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analysis {
    Sts22,
    Ent90b,
    Biasfit,
}

impl Analysis {
    pub const ALL: [Analysis; 3] = [Analysis::Sts22, Analysis::Ent90b, Analysis::Biasfit];
}

impl FromStr for Analysis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sts22" => Ok(Analysis::Sts22),
            "ent90b" => Ok(Analysis::Ent90b),
            "biasfit" => Ok(Analysis::Biasfit),
            _ => Err(format!("unknown analysis `{s}` (expected sts22, ent90b or biasfit)")),
        }
    }
}

/// Streams by test columns; `None` marks a not-applicable cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Heatmap {
    fn push_row(&mut self, label: &str, values: Vec<(String, Option<f64>)>) {
        for (k, _) in &values {
            if !self.columns.contains(k) {
                self.columns.push(k.clone());
                for row in &mut self.cells {
                    row.push(None);
                }
            }
        }
        let mut row = vec![None; self.columns.len()];
        for (k, v) in values {
            let j = self.columns.iter().position(|c| *c == k).expect("column inserted above");
            row[j] = v;
        }
        self.rows.push(label.to_string());
        self.cells.push(row);
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("stream");
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (r, row) in self.rows.iter().zip(&self.cells) {
            out.push_str(r);
            for v in row {
                out.push('\t');
                match v {
                    Some(x) => out.push_str(&format!("{x:.6}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamReport {
    pub label: String,
    pub spec: CircuitSpec,
    pub sts22: Option<Sts22Report>,
    pub ent90b: Option<serde_json::Value>,
    #[serde(skip)]
    pub entropy: Option<EntropyReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub streams: Vec<StreamReport>,
    pub sts22_heatmap: Option<Heatmap>,
    pub ent90b_heatmap: Option<Heatmap>,
    pub frequency_table: Option<FrequencySummary>,
    pub subset_table: Option<SubsetTable>,
}

fn check_file(base: &Path, e: &ManifestEntry) -> Result<(), HarnessError> {
    let Some(file) = &e.file else { return Ok(()) };
    let path = base.join(file);
    let size = fs::metadata(&path).map_err(|err| HarnessError::io(&path, err))?.len() as usize;
    if size != e.length.div_ceil(8) {
        return Err(HarnessError::CorruptFile { path, expected: e.length, got: size * 8 });
    }
    Ok(())
}

fn load_stream(base: &Path, e: &ManifestEntry, file: &str) -> Result<BitStream, HarnessError> {
    let path = base.join(file);
    let (stream, meta) = bits::load_bin(&path)?;
    if meta.length != e.length || stream.len() != e.length {
        return Err(HarnessError::CorruptFile { path, expected: e.length, got: meta.length });
    }
    Ok(stream)
}

fn analyse_stream(
    base: &Path,
    e: &ManifestEntry,
    which: &[Analysis],
    inner: Exec,
) -> Result<Option<StreamReport>, HarnessError> {
    let Some(file) = &e.file else { return Ok(None) };
    let stream = load_stream(base, e, file)?;
    let mut report =
        StreamReport { label: e.label.clone(), spec: e.spec.clone(), sts22: None, ent90b: None, entropy: None, error: None };
    let mut errors = Vec::new();
    if which.contains(&Analysis::Sts22) {
        match sts22::run_battery_with(&stream, &Sts22Params::default(), inner) {
            Ok(r) => report.sts22 = Some(r),
            Err(err) => errors.push(format!("sts22: {err}")),
        }
    }
    if which.contains(&Analysis::Ent90b) {
        match ent90b::min_entropy_with(&stream, inner) {
            Ok(r) => {
                report.ent90b = Some(r.to_json_value());
                report.entropy = Some(r);
            }
            Err(err) => errors.push(format!("ent90b: {err}")),
        }
    }
    if !errors.is_empty() {
        report.error = Some(errors.join("; "));
    }
    Ok(Some(report))
}

fn frequency_rows(manifest: &RunManifest) -> Vec<(CircuitSpec, f64)> {
    let mut rows: Vec<(CircuitSpec, f64)> = manifest
        .entries
        .iter()
        .filter(|e| e.spec.family != FamilyId::C3)
        .filter_map(|e| Some((e.spec.clone(), e.ones_fraction?)))
        .collect();
    // The interleaved C2 stream holds equal shares of each qubit, so its ones
    // fraction is the mean of the per-qubit streams of the same execution.
    let mut keys: Vec<CircuitSpec> =
        rows.iter().filter(|(s, _)| s.family == FamilyId::C2).map(|(s, _)| s.execution_key()).collect();
    keys.dedup();
    for key in keys {
        if rows.iter().any(|(s, _)| *s == key) {
            continue;
        }
        let parts: Vec<f64> =
            rows.iter().filter(|(s, _)| s.select.is_some() && s.execution_key() == key).map(|(_, f)| *f).collect();
        if parts.len() == key.qubits.len() {
            let mean = parts.iter().sum::<f64>() / parts.len() as f64;
            rows.push((key, mean));
        }
    }
    rows
}

fn subset_observations(manifest: &RunManifest) -> Result<Vec<SubsetObservation>, HarnessError> {
    let calib = manifest.calibration()?;
    let noise = NoiseProfile::from_calibration(&calib);
    let topology = Topology::spark();
    let mut out = Vec::new();
    for e in manifest.entries.iter().filter(|e| e.spec.family == FamilyId::C3 && e.error.is_none()) {
        let Some(frac) = e.raw_ones_fraction else { continue };
        let histogram = match (&e.histogram, &e.histogram_qubits) {
            (Some(h), Some(qs)) => {
                let circuit = families::build(&e.spec, &topology)?;
                let ideal = simnoise::ideal_distribution(&circuit, qs);
                Some((h.clone(), simnoise::predicted_distribution(&ideal, &noise, qs)?))
            }
            _ => None,
        };
        out.push(SubsetObservation { spec: e.spec.clone(), ones_fraction: frac, histogram });
    }
    Ok(out)
}

/// Evaluates every successfully written stream of a run. `base` is the
/// directory holding the manifest.
///
/// Every bit file is checked against its declared length before any test
/// runs; a mismatch fails the whole evaluation.
pub fn evaluate(manifest: &RunManifest, base: &Path, which: &[Analysis], exec: Exec) -> Result<Evaluation, HarnessError> {
    for e in &manifest.entries {
        check_file(base, e)?;
    }
    let mut eval = Evaluation::default();
    if which.contains(&Analysis::Sts22) || which.contains(&Analysis::Ent90b) {
        // Streams are the unit of parallel work; each stream runs sequentially.
        let inner = if exec.is_parallel() { Exec::Sequential } else { exec };
        let reports = par::map_slice(exec, &manifest.entries, |e| analyse_stream(base, e, which, inner));
        for r in reports {
            eval.streams.extend(r?);
        }
    }
    if which.contains(&Analysis::Sts22) {
        let mut h = Heatmap::default();
        for s in &eval.streams {
            if let Some(r) = &s.sts22 {
                h.push_row(&s.label, r.results.iter().map(|x| (Sts22Report::column_key(x), x.p_value.value())).collect());
            }
        }
        eval.sts22_heatmap = Some(h);
    }
    if which.contains(&Analysis::Ent90b) {
        let mut h = Heatmap::default();
        for s in &eval.streams {
            if let Some(r) = &s.entropy {
                let mut vals: Vec<(String, Option<f64>)> =
                    Estimator::ALL.iter().map(|&est| (est.code().to_string(), r.get(est).value())).collect();
                vals.push(("hAs".into(), Some(r.h_assessed)));
                vals.push(("hOr".into(), Some(r.h_original)));
                vals.push(("minE".into(), Some(r.min_entropy)));
                h.push_row(&s.label, vals);
            }
        }
        eval.ent90b_heatmap = Some(h);
    }
    if which.contains(&Analysis::Biasfit) {
        let rows = frequency_rows(manifest);
        if !rows.is_empty() {
            eval.frequency_table =
                Some(biasfit::frequency_summary(&rows).map_err(|e| HarnessError::Analysis(e.to_string()))?);
        }
        let obs = subset_observations(manifest)?;
        if !obs.is_empty() {
            let calib = manifest.calibration()?;
            eval.subset_table =
                Some(biasfit::subset_table(&calib, &obs).map_err(|e| HarnessError::Analysis(e.to_string()))?);
        }
    }
    Ok(eval)
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    write_atomic(path, data.as_ref())
}

fn json(v: &impl Serialize) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("report serializes")
}

impl Evaluation {
    /// Writes per-stream reports and grid-level tables under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        let streams = dir.join("streams");
        fs::create_dir_all(&streams).map_err(|e| HarnessError::io(&streams, e))?;
        for s in &self.streams {
            if let Some(r) = &s.sts22 {
                write(&streams.join(format!("{}.sts22.json", s.label)), r.to_json())?;
                write(&streams.join(format!("{}.sts22.txt", s.label)), r.to_text())?;
            }
            if let (Some(v), Some(r)) = (&s.ent90b, &s.entropy) {
                write(&streams.join(format!("{}.ent90b.json", s.label)), json(v))?;
                write(&streams.join(format!("{}.ent90b.txt", s.label)), r.to_text())?;
            }
        }
        if let Some(h) = &self.sts22_heatmap {
            write(&dir.join("sts22_heatmap.tsv"), h.to_tsv())?;
            write(&dir.join("sts22_heatmap.json"), json(h))?;
        }
        if let Some(h) = &self.ent90b_heatmap {
            write(&dir.join("ent90b_heatmap.tsv"), h.to_tsv())?;
            write(&dir.join("ent90b_heatmap.json"), json(h))?;
        }
        if let Some(t) = &self.frequency_table {
            write(&dir.join("frequency_table.txt"), t.to_text())?;
            write(&dir.join("frequency_table.json"), json(&t.to_json_value()))?;
        }
        if let Some(t) = &self.subset_table {
            write(&dir.join("subset_table.txt"), t.to_text())?;
            write(&dir.join("subset_table.json"), json(&t.to_json_value()))?;
        }
        let errors: Vec<_> = self.streams.iter().filter_map(|s| Some((s.label.clone(), s.error.clone()?))).collect();
        write(&dir.join("errors.json"), json(&errors))
    }

    pub fn stream_errors(&self) -> usize {
        self.streams.iter().filter(|s| s.error.is_some()).count()
    }
}
