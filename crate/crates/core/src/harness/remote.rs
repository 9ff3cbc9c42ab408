//! JSON-over-HTTP client for a remote shot executor.
//!
//! Request: `{"ops": [{"gate": "rx", "angle": 1.57, "qubits": [0]}, ...,
//! {"gate": "measure", "qubits": [0]}], "shots": N, "qubit_order": [0]}`.
//! Response: `{"shots": [[0, 1], ...]}`, one array per shot holding the bits
//! of every measurement event in time order.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{Circuit, GateKind, Op, QubitId};
use crate::simnoise::ShotTable;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemoteError {
    #[error("circuit contains non-native gate {0}")]
    NotNative(&'static str),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireOp {
    pub gate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    pub qubits: Vec<QubitId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub ops: Vec<WireOp>,
    pub shots: usize,
    pub qubit_order: Vec<QubitId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub shots: Vec<Vec<u8>>,
}

/// Encodes a circuit; fails on any gate outside `{rx, ry, cz}`.
pub fn wire_request(circuit: &Circuit, shots: usize) -> Result<WireRequest, RemoteError> {
    let mut ops = Vec::with_capacity(circuit.ops().len());
    for op in circuit.ops() {
        ops.push(match op {
            Op::Gate { kind, targets } => {
                if !kind.is_native() {
                    return Err(RemoteError::NotNative(kind.name()));
                }
                let gate = match kind {
                    GateKind::Rx(_) => "rx",
                    GateKind::Ry(_) => "ry",
                    _ => "cz",
                };
                WireOp { gate: gate.into(), angle: kind.angle(), qubits: targets.clone() }
            }
            Op::Measure(qs) => WireOp { gate: "measure".into(), angle: None, qubits: qs.clone() },
        });
    }
    let mut qubit_order: Vec<QubitId> = circuit.measure_events().into_iter().flatten().collect();
    qubit_order.sort_unstable();
    qubit_order.dedup();
    Ok(WireRequest { ops, shots, qubit_order })
}

fn decode(circuit: &Circuit, shots: usize, resp: WireResponse) -> Result<ShotTable, RemoteError> {
    let events = circuit.measure_events();
    let width: usize = events.iter().map(Vec::len).sum();
    if resp.shots.len() != shots {
        return Err(RemoteError::MalformedResponse(format!("expected {shots} shots, got {}", resp.shots.len())));
    }
    let mut bits = Vec::with_capacity(shots * width);
    for (i, s) in resp.shots.iter().enumerate() {
        if s.len() != width {
            return Err(RemoteError::MalformedResponse(format!("shot {i} has {} bits, expected {width}", s.len())));
        }
        if s.iter().any(|&b| b > 1) {
            return Err(RemoteError::MalformedResponse(format!("shot {i} holds a value other than 0 or 1")));
        }
        bits.extend_from_slice(s);
    }
    ShotTable::new(events, bits, 0).map_err(|e| RemoteError::MalformedResponse(e.to_string()))
}

/// Posts a native circuit to `endpoint` and validates the returned shots.
pub fn submit_remote(
    circuit: &Circuit,
    shots: usize,
    endpoint: &str,
    timeout: Duration,
) -> Result<ShotTable, RemoteError> {
    if shots == 0 {
        return Err(RemoteError::MalformedResponse("shot count must be at least 1".into()));
    }
    let req = wire_request(circuit, shots)?;
    let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
    let mut resp = agent.post(endpoint).send_json(&req).map_err(|e| RemoteError::Transport(e.to_string()))?;
    let body: WireResponse = resp.body_mut().read_json().map_err(|e| match e {
        ureq::Error::Json(j) => RemoteError::MalformedResponse(j.to_string()),
        other => RemoteError::Transport(other.to_string()),
    })?;
    decode(circuit, shots, body)
}
