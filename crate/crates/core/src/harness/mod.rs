//! Experiment plumbing: configuration, execution backends, bit-file output
//! with a run manifest, and evaluation of a finished run into reports.

mod config;
mod evaluate;
mod remote;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::{self, BitsError, ExtractionPolicy, StreamMeta};
use crate::families::{self, CircuitSpec, FamilyError, FamilyId};
use crate::par::{self, Exec};
use crate::qcore::{CalibrationError, CalibrationSnapshot, Circuit, QubitId, Topology};
use crate::simnoise::{self, NoiseProfile, ShotTable, SimError};

pub use config::{BackendConfig, ExperimentConfig, GridSelection, NoiseOverrides, DEFAULT_BITS_PER_SPEC};
pub use evaluate::{evaluate, Analysis, Evaluation, Heatmap};
pub use remote::{submit_remote, wire_request, RemoteError, WireRequest, WireResponse, DEFAULT_TIMEOUT};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{path}: manifest declares {expected} bits, file holds {got}")]
    CorruptFile { path: PathBuf, expected: usize, got: usize },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("{0}")]
    Analysis(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }
}

/// Executes a native circuit for a number of shots.
pub trait Backend: Sync {
    fn name(&self) -> String;
    fn execute(&self, circuit: &Circuit, shots: usize, seed: u64) -> Result<ShotTable, HarnessError>;
}

/// The calibrated statevector simulator.
pub struct LocalBackend {
    pub noise: NoiseProfile,
    pub exec: Exec,
}

impl Backend for LocalBackend {
    fn name(&self) -> String {
        "local".into()
    }

    fn execute(&self, circuit: &Circuit, shots: usize, seed: u64) -> Result<ShotTable, HarnessError> {
        Ok(simnoise::run_with(circuit, shots, &self.noise, seed, self.exec)?)
    }
}

/// An HTTP endpoint speaking the JSON wire schema of [`submit_remote`].
/// Transport failures are retried; malformed responses are not.
pub struct RemoteBackend {
    pub endpoint: String,
    pub timeout: std::time::Duration,
    pub retries: u32,
}

impl Backend for RemoteBackend {
    fn name(&self) -> String {
        format!("remote({})", self.endpoint)
    }

    fn execute(&self, circuit: &Circuit, shots: usize, _seed: u64) -> Result<ShotTable, HarnessError> {
        let mut attempt = 0;
        loop {
            match submit_remote(circuit, shots, &self.endpoint, self.timeout) {
                Err(RemoteError::Transport(_)) if attempt < self.retries => attempt += 1,
                r => return Ok(r?),
            }
        }
    }
}

/// One requested stream of a run. Either `file` or `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub spec: CircuitSpec,
    pub label: String,
    /// Path of the packed bit file, relative to the manifest.
    pub file: Option<String>,
    pub length: usize,
    pub shots: usize,
    pub seed: u64,
    pub policy: Option<ExtractionPolicy>,
    /// Ones fraction of the extracted stream.
    pub ones_fraction: Option<f64>,
    /// Ones fraction over every measured bit of the execution.
    pub raw_ones_fraction: Option<f64>,
    /// Outcome counts of a single measurement event over `histogram_qubits`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_qubits: Option<Vec<QubitId>>,
    /// Unix time in milliseconds.
    pub started: u64,
    pub finished: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub backend: String,
    pub seed: u64,
    pub calibration_digest: String,
    /// The calibration snapshot in its TOML file form.
    pub calibration: String,
    pub entries: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }

    pub fn calibration(&self) -> Result<CalibrationSnapshot, HarnessError> {
        Ok(CalibrationSnapshot::from_toml_str(&self.calibration)?)
    }

    pub fn load(path: &Path) -> Result<RunManifest, HarnessError> {
        let raw = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_slice(&raw).map_err(|e| HarnessError::Manifest(e.to_string()))
    }

    /// Writes through a temporary file and a rename so readers never see a
    /// partial manifest.
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let json = serde_json::to_vec_pretty(self).map_err(|e| HarnessError::Manifest(e.to_string()))?;
        write_atomic(path, &json)
    }
}

pub(crate) fn write_atomic(path: &Path, data: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    f.write_all(data).and_then(|_| f.sync_all()).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Seed of one execution: the first eight bytes of SHA-256 over the run
/// seed and the execution label.
pub fn execution_seed(run_seed: u64, key: &CircuitSpec) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(key.label().as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Groups specs by execution key, keeping first-appearance order.
fn group_executions(specs: &[CircuitSpec]) -> Vec<(CircuitSpec, Vec<usize>)> {
    let mut groups: Vec<(CircuitSpec, Vec<usize>)> = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let key = s.execution_key();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups
}

fn execute_group(
    key: &CircuitSpec,
    shots: usize,
    seed: u64,
    topology: &Topology,
    backend: &dyn Backend,
) -> Result<ShotTable, HarnessError> {
    let circuit = families::transpile(&families::build(key, topology)?, topology)?;
    let ghz = match key.family {
        FamilyId::C3 => Some(families::ghz_source(&key.qubits, topology)?),
        _ => None,
    };
    let table = backend.execute(&circuit, shots, seed)?;
    Ok(table.with_spec(key.clone(), ghz))
}

fn write_stream(
    out: &Path,
    spec: &CircuitSpec,
    table: &ShotTable,
    seed: u64,
) -> Result<(String, usize, ExtractionPolicy, f64), HarnessError> {
    let policy = ExtractionPolicy::default_for(spec);
    let stream = bits::extract(table, policy)?;
    let rel = format!("bits/{}.bin", spec.label());
    let meta = StreamMeta { length: stream.len(), spec: Some(spec.clone()), seed, policy: Some(policy) };
    bits::save_bin(&out.join(&rel), &stream, &meta)?;
    Ok((rel, stream.len(), policy, bits::ones_fraction(&stream)?))
}

/// Runs every spec of the configuration, writing `bits/<label>.bin` files
/// and `manifest.json` under the output directory.
///
/// Configuration problems are returned as errors; execution failures are
/// recorded per spec in the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    let topology = Topology::spark();
    let specs = config.specs(&topology)?;
    let calib = config.load_calibration()?;
    let backend = config.backend(&calib)?;
    let out = &config.out;
    fs::create_dir_all(out.join("bits")).map_err(|e| HarnessError::io(out, e))?;

    let groups = group_executions(&specs);
    let run_group = |(key, members): &(CircuitSpec, Vec<usize>)| -> Vec<(usize, ManifestEntry)> {
        let started = now();
        let shots = members.iter().map(|&i| config.shots_for(&specs[i])).max().unwrap_or(1);
        let seed = execution_seed(config.seed, key);
        let table = execute_group(key, shots, seed, &topology, backend.as_ref());
        members
            .iter()
            .map(|&i| {
                let spec = &specs[i];
                let mut entry = ManifestEntry {
                    spec: spec.clone(),
                    label: spec.label(),
                    file: None,
                    length: 0,
                    shots,
                    seed,
                    policy: None,
                    ones_fraction: None,
                    raw_ones_fraction: None,
                    histogram: None,
                    histogram_qubits: None,
                    started,
                    finished: started,
                    error: None,
                };
                let written = table.as_ref().map_err(|e| e.to_string()).and_then(|t| {
                    if t.events().len() == 1 {
                        entry.histogram = Some(t.histogram(0));
                        entry.histogram_qubits = Some(t.events()[0].clone());
                    }
                    entry.raw_ones_fraction = Some(t.raw_ones_fraction());
                    write_stream(out, spec, t, seed).map_err(|e| e.to_string())
                });
                match written {
                    Ok((file, length, policy, frac)) => {
                        entry.file = Some(file);
                        entry.length = length;
                        entry.policy = Some(policy);
                        entry.ones_fraction = Some(frac);
                    }
                    Err(e) => entry.error = Some(e),
                }
                entry.finished = now();
                (i, entry)
            })
            .collect()
    };
    let done = par::with_workers(config.workers, || par::map_slice(config.exec, &groups, run_group));
    let mut entries: Vec<(usize, ManifestEntry)> = done.into_iter().flatten().collect();
    entries.sort_by_key(|(i, _)| *i);

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        backend: backend.name(),
        seed: config.seed,
        calibration_digest: calib.digest(),
        calibration: calib.to_toml_string(),
        entries: entries.into_iter().map(|(_, e)| e).collect(),
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::GateChoice;

    #[test]
    fn seeds_depend_on_key_and_run_seed() {
        let a = CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]);
        let b = CircuitSpec::new(FamilyId::C1, GateChoice::H, &[1]);
        assert_eq!(execution_seed(1, &a), execution_seed(1, &a));
        assert_ne!(execution_seed(1, &a), execution_seed(1, &b));
        assert_ne!(execution_seed(1, &a), execution_seed(2, &a));
        let s = CircuitSpec::new(FamilyId::C2, GateChoice::H, &[0, 1]).with_select(1);
        assert_eq!(execution_seed(3, &s.execution_key()), execution_seed(3, &s.execution_key()));
    }

    #[test]
    fn c2_selects_share_one_execution() {
        let grid = families::enumerate_paper_grid(&Topology::spark()).unwrap();
        let groups = group_executions(&grid);
        let c2: Vec<_> = groups.iter().filter(|(k, _)| k.family == FamilyId::C2).collect();
        assert_eq!(c2.len(), 3);
        assert!(c2.iter().all(|(_, m)| m.len() == 5));
        assert_eq!(groups.len(), 105 - 12);
    }
}
