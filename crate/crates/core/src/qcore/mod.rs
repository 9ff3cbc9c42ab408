//! Quantum state representation, gates, measurement and device metadata.

mod calibration;
mod circuit;
mod gate;
mod state;
mod topology;

pub use calibration::{CalibrationError, CalibrationSnapshot, QubitCalibration};
pub use circuit::{Circuit, CircuitError, Op};
pub use gate::{equal_up_to_global_phase, GateKind, Matrix};
pub use state::{apply_gate, measure, Amplitude, StateVector};
pub use topology::Topology;

use thiserror::Error;

/// Index of a physical qubit. Qubit 0 is the least significant bit of a
/// basis-state index.
pub type QubitId = usize;

/// Dense simulation is capped at this many qubits.
pub const MAX_QUBITS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcoreError {
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: QubitId, n_qubits: usize },
    #[error("duplicate target qubit {0}")]
    DuplicateTarget(QubitId),
    #[error("gate {gate} expects {expected} target(s), got {got}")]
    Arity { gate: &'static str, expected: usize, got: usize },
    #[error("non-finite rotation angle")]
    NonFiniteAngle,
    #[error("register of {0} qubits exceeds the dense-simulation limit")]
    TooManyQubits(usize),
    #[error("matrix dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("state has zero norm")]
    ZeroNorm,
}
