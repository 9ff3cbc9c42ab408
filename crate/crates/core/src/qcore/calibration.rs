use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::QubitId;

/// Per-qubit calibration record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    /// Pr(read 0 | prepared 1).
    pub p01: f64,
    /// Pr(read 1 | prepared 0).
    pub p10: f64,
    pub f_1q: f64,
    pub f_2q: f64,
    pub t1_ms: f64,
    pub t2_ms: f64,
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("qubit {qubit}: {field} = {value} is outside its admissible range")]
    OutOfRange { qubit: QubitId, field: &'static str, value: f64 },
    #[error("qubit records must have ids 0..n in order; found {found} at position {position}")]
    BadId { position: usize, found: QubitId },
    #[error("no qubit records")]
    Empty,
    #[error("calibration parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("calibration i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct FileRecord {
    id: QubitId,
    #[serde(flatten)]
    cal: QubitCalibration,
}

#[derive(Serialize, Deserialize)]
struct CalibrationFile {
    qubit: Vec<FileRecord>,
}

/// Calibration data for every qubit of a device, indexed by qubit id.
///
/// T1/T2 are carried for bookkeeping only; the simulator does not model
/// decoherence.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationSnapshot {
    qubits: Vec<QubitCalibration>,
}

impl CalibrationSnapshot {
    pub fn new(qubits: Vec<QubitCalibration>) -> Result<Self, CalibrationError> {
        if qubits.is_empty() {
            return Err(CalibrationError::Empty);
        }
        for (q, c) in qubits.iter().enumerate() {
            let prob = [("p01", c.p01), ("p10", c.p10), ("f_1q", c.f_1q), ("f_2q", c.f_2q)];
            for (field, value) in prob {
                if !(0.0..=1.0).contains(&value) {
                    return Err(CalibrationError::OutOfRange { qubit: q, field, value });
                }
            }
            for (field, value) in [("t1_ms", c.t1_ms), ("t2_ms", c.t2_ms)] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(CalibrationError::OutOfRange { qubit: q, field, value });
                }
            }
        }
        Ok(CalibrationSnapshot { qubits })
    }

    /// Typical published values for the five-qubit star device: 97 % readout
    /// fidelity split symmetrically, 99.9 % / 99 % gate fidelities.
    pub fn odra5_typical() -> Self {
        Self::uniform(5, 0.03, 0.03)
    }

    /// The typical snapshot with the assignment error split unevenly
    /// (`p01` = 0.0391, `p10` = 0.0209), biasing readout towards 0.
    pub fn odra5_asymmetric() -> Self {
        Self::uniform(5, 0.0391, 0.0209)
    }

    /// `n` identical qubits with the given assignment errors.
    pub fn uniform(n: usize, p01: f64, p10: f64) -> Self {
        let q = QubitCalibration { p01, p10, f_1q: 0.999, f_2q: 0.99, t1_ms: 0.964, t2_ms: 1.155 };
        Self::new(vec![q; n]).expect("uniform calibration in range")
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn get(&self, q: QubitId) -> Option<&QubitCalibration> {
        self.qubits.get(q)
    }

    pub fn qubits(&self) -> &[QubitCalibration] {
        &self.qubits
    }

    /// Per-field arithmetic mean across qubits.
    pub fn averaged(&self) -> QubitCalibration {
        let n = self.qubits.len() as f64;
        let mean = |f: fn(&QubitCalibration) -> f64| self.qubits.iter().map(f).sum::<f64>() / n;
        QubitCalibration {
            p01: mean(|c| c.p01),
            p10: mean(|c| c.p10),
            f_1q: mean(|c| c.f_1q),
            f_2q: mean(|c| c.f_2q),
            t1_ms: mean(|c| c.t1_ms),
            t2_ms: mean(|c| c.t2_ms),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, CalibrationError> {
        let file: CalibrationFile = toml::from_str(s)?;
        let mut qubits = Vec::with_capacity(file.qubit.len());
        for (position, rec) in file.qubit.into_iter().enumerate() {
            if rec.id != position {
                return Err(CalibrationError::BadId { position, found: rec.id });
            }
            qubits.push(rec.cal);
        }
        Self::new(qubits)
    }

    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let file = CalibrationFile {
            qubit: self.qubits.iter().enumerate().map(|(id, cal)| FileRecord { id, cal: *cal }).collect(),
        };
        toml::to_string(&file).expect("calibration serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[[qubit]]
id = 0
p01 = 0.04
p10 = 0.02
f_1q = 0.999
f_2q = 0.99
t1_ms = 0.964
t2_ms = 1.155

[[qubit]]
id = 1
p01 = 0.03
p10 = 0.03
f_1q = 0.998
f_2q = 0.985
t1_ms = 0.9
t2_ms = 1.0
"#;

    #[test]
    fn parses_and_roundtrips() {
        let c = CalibrationSnapshot::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get(0).unwrap().p01, 0.04);
        let again = CalibrationSnapshot::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.digest(), c.digest());
        assert!((c.averaged().p01 - 0.035).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = SAMPLE.replace("p10 = 0.02", "p10 = 1.5");
        assert!(matches!(
            CalibrationSnapshot::from_toml_str(&bad),
            Err(CalibrationError::OutOfRange { field: "p10", .. })
        ));
        let bad = SAMPLE.replace("t1_ms = 0.9", "t1_ms = 0.0");
        assert!(CalibrationSnapshot::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("id = 1", "id = 3");
        assert!(matches!(CalibrationSnapshot::from_toml_str(&bad), Err(CalibrationError::BadId { .. })));
    }
}
