use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use super::{GateKind, Matrix, QcoreError, QubitId, StateVector, MAX_QUBITS};

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Gate { kind: GateKind, targets: Vec<QubitId> },
    Measure(Vec<QubitId>),
}

impl Op {
    pub fn gate(kind: GateKind, targets: &[QubitId]) -> Op {
        Op::Gate { kind, targets: targets.to_vec() }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (head, qs) = match self {
            Op::Gate { kind, targets } => (kind.to_string(), targets),
            Op::Measure(qs) => ("M".to_string(), qs),
        };
        f.write_str(&head)?;
        for q in qs {
            write!(f, " {q}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error(transparent)]
    Qubit(#[from] QcoreError),
    #[error("circuit has no measurement")]
    NoMeasurement,
    #[error("gate {0} is not native")]
    NotNative(&'static str),
    #[error("empty measurement")]
    EmptyMeasure,
}

/// Ordered gate and measurement list over `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<Op>,
    native_only: bool,
}

impl Circuit {
    pub fn new(n_qubits: usize, ops: Vec<Op>, native_only: bool) -> Result<Self, CircuitError> {
        if n_qubits > MAX_QUBITS {
            return Err(QcoreError::TooManyQubits(n_qubits).into());
        }
        let check = |q: QubitId| {
            if q >= n_qubits {
                Err(QcoreError::QubitOutOfRange { qubit: q, n_qubits })
            } else {
                Ok(())
            }
        };
        let mut measured = false;
        for op in &ops {
            match op {
                Op::Gate { kind, targets } => {
                    kind.validate()?;
                    if targets.len() != kind.arity() {
                        return Err(QcoreError::Arity { gate: kind.name(), expected: kind.arity(), got: targets.len() }.into());
                    }
                    targets.iter().try_for_each(|&q| check(q))?;
                    if targets.len() == 2 && targets[0] == targets[1] {
                        return Err(QcoreError::DuplicateTarget(targets[0]).into());
                    }
                    if native_only && !kind.is_native() {
                        return Err(CircuitError::NotNative(kind.name()));
                    }
                }
                Op::Measure(qs) => {
                    if qs.is_empty() {
                        return Err(CircuitError::EmptyMeasure);
                    }
                    for (i, &q) in qs.iter().enumerate() {
                        check(q)?;
                        if qs[..i].contains(&q) {
                            return Err(QcoreError::DuplicateTarget(q).into());
                        }
                    }
                    measured = true;
                }
            }
        }
        if !measured {
            return Err(CircuitError::NoMeasurement);
        }
        Ok(Circuit { n_qubits, ops, native_only })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn native_only(&self) -> bool {
        self.native_only
    }

    /// Qubit lists of each measurement, in time order.
    pub fn measure_events(&self) -> Vec<Vec<QubitId>> {
        self.ops
            .iter()
            .filter_map(|op| match op {
                Op::Measure(qs) => Some(qs.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn gates(&self) -> impl Iterator<Item = (GateKind, &[QubitId])> {
        self.ops.iter().filter_map(|op| match op {
            Op::Gate { kind, targets } => Some((*kind, targets.as_slice())),
            _ => None,
        })
    }

    /// Full unitary of the gate sequence with measurements dropped.
    pub fn unitary(&self) -> Matrix {
        let dim = 1usize << self.n_qubits;
        let mut m = Matrix::zeros(dim);
        for col in 0..dim {
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            amps[col] = Complex64::new(1.0, 0.0);
            let mut s = StateVector::from_amplitudes(amps).expect("power-of-two basis");
            for (kind, targets) in self.gates() {
                s.apply(kind, targets).expect("validated circuit");
            }
            for (row, a) in s.amplitudes().iter().enumerate() {
                m.set(row, col, *a);
            }
        }
        m
    }

    /// Statevector after all gates from `|0...0>`, ignoring measurements.
    pub fn final_state(&self) -> StateVector {
        let mut s = StateVector::zero(self.n_qubits).expect("validated size");
        for (kind, targets) in self.gates() {
            s.apply(kind, targets).expect("validated circuit");
        }
        s
    }
}

/// One op per line: `GATE(theta) q...` or `M q...`.
impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.ops {
            writeln!(f, "{op}")?;
        }
        Ok(())
    }
}
