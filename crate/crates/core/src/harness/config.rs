use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, HarnessError, LocalBackend, RemoteBackend};
use crate::families::{self, CircuitSpec};
use crate::par::Exec;
use crate::qcore::{CalibrationSnapshot, Topology};
use crate::simnoise::{AngleError, NoiseProfile};

/// Stream length targeted when no shot count is configured.
pub const DEFAULT_BITS_PER_SPEC: usize = 1_000_000;

/// Either the keyword `paper-grid` or an explicit list of specs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSelection {
    Keyword(String),
    Specs(Vec<CircuitSpec>),
}

impl Default for GridSelection {
    fn default() -> Self {
        GridSelection::Keyword("paper-grid".into())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseOverrides {
    /// Replace the calibration's readout errors with perfect readout.
    #[serde(default)]
    pub ideal_readout: bool,
    pub gate_angle_error: Option<AngleError>,
    pub depolarizing_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Local,
    Remote {
        endpoint: String,
        #[serde(default = "default_timeout_s")]
        timeout_s: u64,
        #[serde(default = "default_retries")]
        retries: u32,
    },
}

fn default_timeout_s() -> u64 {
    super::DEFAULT_TIMEOUT.as_secs()
}

fn default_retries() -> u32 {
    2
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Local
    }
}

/// A run description, normally read from TOML:
///
/// ```toml
/// grid = "paper-grid"
/// shots = 100000
/// seed = 7
/// calibration = "calib/odra5_typical.toml"
/// out = "runs/paper"
///
/// [backend]
/// kind = "local"
/// ```
///
/// `grid` may instead be an array of `{ family, gate, qubits }` tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridSelection,
    /// Shots per spec; by default enough for [`DEFAULT_BITS_PER_SPEC`] bits.
    pub shots: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Calibration file; the built-in typical snapshot when absent.
    pub calibration: Option<PathBuf>,
    #[serde(default)]
    pub noise: NoiseOverrides,
    #[serde(default)]
    pub backend: BackendConfig,
    pub out: PathBuf,
    /// Concurrent executions; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub exec: Exec,
}

impl ExperimentConfig {
    pub fn new(grid: GridSelection, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            grid,
            shots: None,
            seed: 0,
            calibration: None,
            noise: NoiseOverrides::default(),
            backend: BackendConfig::Local,
            out: out.into(),
            workers: 0,
            exec: Exec::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_table(table: toml::Table) -> Result<Self, HarnessError> {
        table.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file as a table with its relative `out` and
    /// `calibration` paths resolved against the file's directory.
    pub fn load_table(path: &Path) -> Result<toml::Table, HarnessError> {
        let raw = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut table: toml::Table = raw.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for key in ["out", "calibration"] {
            if let Some(toml::Value::String(p)) = table.get_mut(key) {
                if Path::new(p.as_str()).is_relative() {
                    *p = base.join(p.as_str()).to_string_lossy().into_owned();
                }
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_table(Self::load_table(path)?)
    }

    /// Expands and validates the grid.
    pub fn specs(&self, topology: &Topology) -> Result<Vec<CircuitSpec>, HarnessError> {
        if self.shots == Some(0) {
            return Err(HarnessError::Config("shots must be at least 1".into()));
        }
        let specs = match &self.grid {
            GridSelection::Keyword(k) if k == "paper-grid" => families::enumerate_paper_grid(topology)?,
            GridSelection::Keyword(k) => return Err(HarnessError::Config(format!("unknown grid keyword `{k}`"))),
            GridSelection::Specs(v) => v.clone(),
        };
        if specs.is_empty() {
            return Err(HarnessError::Config("grid is empty".into()));
        }
        for (i, s) in specs.iter().enumerate() {
            families::build(s, topology).map_err(|e| HarnessError::Config(format!("spec {}: {e}", s.label())))?;
            if specs[..i].contains(s) {
                return Err(HarnessError::Config(format!("spec {} listed twice", s.label())));
            }
        }
        Ok(specs)
    }

    pub fn shots_for(&self, spec: &CircuitSpec) -> usize {
        self.shots.unwrap_or_else(|| DEFAULT_BITS_PER_SPEC.div_ceil(spec.bits_per_shot()))
    }

    pub fn load_calibration(&self) -> Result<CalibrationSnapshot, HarnessError> {
        match &self.calibration {
            Some(p) => Ok(CalibrationSnapshot::load(p)?),
            None => Ok(CalibrationSnapshot::odra5_typical()),
        }
    }

    pub fn noise_profile(&self, calib: &CalibrationSnapshot) -> Result<NoiseProfile, HarnessError> {
        let mut noise =
            if self.noise.ideal_readout { NoiseProfile::ideal() } else { NoiseProfile::from_calibration(calib) };
        if let Some(a) = self.noise.gate_angle_error {
            noise.gate_angle_error = a;
        }
        if let Some(p) = self.noise.depolarizing_p {
            noise.depolarizing_p = p;
        }
        noise.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(noise)
    }

    pub fn backend(&self, calib: &CalibrationSnapshot) -> Result<Box<dyn Backend>, HarnessError> {
        Ok(match &self.backend {
            BackendConfig::Local => Box::new(LocalBackend { noise: self.noise_profile(calib)?, exec: self.exec }),
            BackendConfig::Remote { endpoint, timeout_s, retries } => {
                if endpoint.is_empty() {
                    return Err(HarnessError::Config("remote backend needs an endpoint".into()));
                }
                Box::new(RemoteBackend {
                    endpoint: endpoint.clone(),
                    timeout: Duration::from_secs(*timeout_s),
                    retries: *retries,
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{FamilyId, GateChoice};

    #[test]
    fn parses_keyword_and_explicit_grids() {
        let c = ExperimentConfig::from_toml_str("grid = \"paper-grid\"\nseed = 3\nout = \"x\"\n").unwrap();
        assert_eq!(c.specs(&Topology::spark()).unwrap().len(), 105);
        assert_eq!(c.backend, BackendConfig::Local);
        let c = ExperimentConfig::from_toml_str(
            "out = \"x\"\nshots = 10\n[[grid]]\nfamily = \"C3\"\ngate = \"Ry\"\nqubits = [0, 2]\n\n[backend]\nkind = \"remote\"\nendpoint = \"http://127.0.0.1:9\"\n",
        )
        .unwrap();
        assert_eq!(c.specs(&Topology::spark()).unwrap(), vec![CircuitSpec::new(FamilyId::C3, GateChoice::Ry, &[0, 2])]);
        assert!(matches!(c.backend, BackendConfig::Remote { timeout_s: 60, .. }));
    }

    #[test]
    fn rejects_invalid_configs() {
        let topo = Topology::spark();
        let bad = |s: &str| ExperimentConfig::from_toml_str(s).and_then(|c| c.specs(&topo).map(|_| ()));
        assert!(bad("out = \"x\"\nshots = 0\n").is_err());
        assert!(bad("out = \"x\"\ngrid = \"everything\"\n").is_err());
        assert!(bad("out = \"x\"\n[[grid]]\nfamily = \"C3\"\ngate = \"H\"\nqubits = [0, 1]\n").is_err());
        assert!(bad("out = \"x\"\nbogus = 1\n").is_err());
        assert!(bad("seed = 1\n").is_err());
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        std::fs::write(&p, "out = \"runs\"\ncalibration = \"/abs/c.toml\"\n").unwrap();
        let c = ExperimentConfig::load(&p).unwrap();
        assert_eq!(c.out, dir.path().join("runs"));
        assert_eq!(c.calibration.unwrap(), PathBuf::from("/abs/c.toml"));
    }

    #[test]
    fn default_shots_target_a_million_bits() {
        let c = ExperimentConfig::new(GridSelection::default(), "x");
        assert_eq!(c.shots_for(&CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0])), 1_000_000);
        assert_eq!(c.shots_for(&CircuitSpec::new(FamilyId::C5, GateChoice::H, &[0])), 500_000);
        assert_eq!(c.shots_for(&CircuitSpec::new(FamilyId::C2, GateChoice::H, &[0, 1, 2, 3, 4])), 200_000);
        let sel = CircuitSpec::new(FamilyId::C2, GateChoice::H, &[0, 1, 2, 3, 4]).with_select(4);
        assert_eq!(c.shots_for(&sel), 1_000_000);
    }
}
