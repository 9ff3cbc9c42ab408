//! The five QRNG circuit families, their gate variants, the paper grid of
//! circuit subvariants, and transpilation to the native `{Rx, Ry, CZ}` set.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{Circuit, CircuitError, GateKind, Op, QubitId, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FamilyId {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl FamilyId {
    pub const ALL: [FamilyId; 5] = [FamilyId::C1, FamilyId::C2, FamilyId::C3, FamilyId::C4, FamilyId::C5];
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for FamilyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "C1" => Ok(FamilyId::C1),
            "C2" => Ok(FamilyId::C2),
            "C3" => Ok(FamilyId::C3),
            "C4" => Ok(FamilyId::C4),
            "C5" => Ok(FamilyId::C5),
            _ => Err(format!("unknown circuit family `{s}`")),
        }
    }
}

/// Superposition gate; the rotations are at angle pi/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateChoice {
    H,
    Rx,
    Ry,
}

impl GateChoice {
    pub const ALL: [GateChoice; 3] = [GateChoice::H, GateChoice::Rx, GateChoice::Ry];

    pub fn kind(self) -> GateKind {
        match self {
            GateChoice::H => GateKind::H,
            GateChoice::Rx => GateKind::Rx(FRAC_PI_2),
            GateChoice::Ry => GateKind::Ry(FRAC_PI_2),
        }
    }
}

impl fmt::Display for GateChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for GateChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "h" => Ok(GateChoice::H),
            "rx" => Ok(GateChoice::Rx),
            "ry" => Ok(GateChoice::Ry),
            _ => Err(format!("unknown gate `{s}` (expected H, Rx or Ry)")),
        }
    }
}

/// One circuit subvariant.
///
/// `select` picks a single qubit's stream out of a multi-qubit C2 run; the
/// paper grid uses it to report the per-qubit streams of one all-qubit C2
/// execution per gate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub family: FamilyId,
    pub gate: GateChoice,
    pub qubits: Vec<QubitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<QubitId>,
}

pub const DEFAULT_C5_REPETITIONS: usize = 2;

impl CircuitSpec {
    pub fn new(family: FamilyId, gate: GateChoice, qubits: &[QubitId]) -> Self {
        CircuitSpec { family, gate, qubits: qubits.to_vec(), repetitions: None, select: None }
    }

    pub fn with_repetitions(mut self, reps: usize) -> Self {
        self.repetitions = Some(reps);
        self
    }

    pub fn with_select(mut self, q: QubitId) -> Self {
        self.select = Some(q);
        self
    }

    /// Measurements per shot on the measured qubit (C5) or 1.
    pub fn repetitions(&self) -> usize {
        match self.family {
            FamilyId::C5 => self.repetitions.unwrap_or(DEFAULT_C5_REPETITIONS),
            _ => 1,
        }
    }

    /// Bits contributed per shot by this spec's default stream.
    pub fn bits_per_shot(&self) -> usize {
        match self.family {
            FamilyId::C2 if self.select.is_none() => self.qubits.len(),
            FamilyId::C5 => self.repetitions(),
            _ => 1,
        }
    }

    /// The spec with `select` cleared: specs equal under this key describe
    /// the same physical execution.
    pub fn execution_key(&self) -> CircuitSpec {
        CircuitSpec { select: None, ..self.clone() }
    }

    /// File-name friendly label, e.g. `C3-Ry-q0234` or `C2-H-q01234-s3`.
    pub fn label(&self) -> String {
        let qs: String = self.qubits.iter().map(|q| q.to_string()).collect();
        let mut s = format!("{}-{}-q{}", self.family, self.gate, qs);
        if self.family == FamilyId::C5 && self.repetitions() != DEFAULT_C5_REPETITIONS {
            s.push_str(&format!("-r{}", self.repetitions()));
        }
        if let Some(q) = self.select {
            s.push_str(&format!("-s{q}"));
        }
        s
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), FamilyError> {
        if self.qubits.is_empty() {
            return Err(FamilyError::EmptyQubits);
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= topology.n_qubits() {
                return Err(FamilyError::QubitOutOfRange(q));
            }
            if self.qubits[..i].contains(&q) {
                return Err(FamilyError::DuplicateQubit(q));
            }
        }
        let n = self.qubits.len();
        let ok = match self.family {
            FamilyId::C1 | FamilyId::C4 | FamilyId::C5 => n == 1,
            FamilyId::C2 => n >= 1,
            FamilyId::C3 => n >= 2,
        };
        if !ok {
            return Err(FamilyError::QubitCount { family: self.family, got: n });
        }
        match (self.family, self.repetitions) {
            (FamilyId::C5, Some(r)) if r < 2 => return Err(FamilyError::Repetitions(r)),
            (FamilyId::C5, _) | (_, None) | (_, Some(1)) => {}
            (_, Some(r)) => return Err(FamilyError::Repetitions(r)),
        }
        if let Some(s) = self.select {
            if self.family != FamilyId::C2 || !self.qubits.contains(&s) {
                return Err(FamilyError::BadSelect(s));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CircuitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("empty qubit list")]
    EmptyQubits,
    #[error("qubit {0} is not on the device")]
    QubitOutOfRange(QubitId),
    #[error("qubit {0} listed twice")]
    DuplicateQubit(QubitId),
    #[error("{family} cannot use {got} qubit(s)")]
    QubitCount { family: FamilyId, got: usize },
    #[error("invalid repetition count {0}")]
    Repetitions(usize),
    #[error("select qubit {0} is not part of a C2 qubit set")]
    BadSelect(QubitId),
    #[error("qubit set {0:?} has no vertex adjacent to all others")]
    NotConnectable(Vec<QubitId>),
    #[error("no coupling between qubits {0} and {1}")]
    NoRoute(QubitId, QubitId),
    #[error("topology has no hub")]
    NoHub,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Centre of the GHZ star for `qubits`: a member adjacent to every other
/// member, preferring the topology hub, then the lowest id.
pub fn ghz_source(qubits: &[QubitId], topology: &Topology) -> Result<QubitId, FamilyError> {
    let centres: Vec<QubitId> = qubits
        .iter()
        .copied()
        .filter(|&c| qubits.iter().all(|&o| o == c || topology.has_edge(c, o)))
        .collect();
    if let Some(h) = topology.hub().filter(|h| centres.contains(h)) {
        return Ok(h);
    }
    centres.into_iter().min().ok_or_else(|| FamilyError::NotConnectable(qubits.to_vec()))
}

/// Abstract (pre-transpilation) circuit for `spec` on the device register.
pub fn build(spec: &CircuitSpec, topology: &Topology) -> Result<Circuit, FamilyError> {
    spec.validate(topology)?;
    let g = spec.gate.kind();
    let qs = &spec.qubits;
    let mut ops = Vec::new();
    match spec.family {
        FamilyId::C1 => {
            ops.push(Op::gate(g, &[qs[0]]));
            ops.push(Op::Measure(vec![qs[0]]));
        }
        FamilyId::C2 => {
            ops.extend(qs.iter().map(|&q| Op::gate(g, &[q])));
            ops.push(Op::Measure(qs.clone()));
        }
        FamilyId::C3 => {
            let src = ghz_source(qs, topology)?;
            ops.push(Op::gate(g, &[src]));
            let mut others: Vec<QubitId> = qs.iter().copied().filter(|&q| q != src).collect();
            others.sort_unstable();
            ops.extend(others.into_iter().map(|t| Op::gate(GateKind::Cx, &[src, t])));
            ops.push(Op::Measure(qs.clone()));
        }
        FamilyId::C4 => {
            ops.push(Op::gate(GateKind::X, &[qs[0]]));
            ops.push(Op::gate(g, &[qs[0]]));
            ops.push(Op::Measure(vec![qs[0]]));
        }
        FamilyId::C5 => {
            for _ in 0..spec.repetitions() {
                ops.push(Op::gate(g, &[qs[0]]));
                ops.push(Op::Measure(vec![qs[0]]));
            }
        }
    }
    Ok(Circuit::new(topology.n_qubits(), ops, false)?)
}

/// Rewrites abstract gates into `{Rx, Ry, CZ}`:
/// `H -> Ry(pi/2), Rx(pi)`; `X -> Rx(pi)`; `CX(c,t) -> H_t CZ(c,t) H_t`.
pub fn transpile(circuit: &Circuit, topology: &Topology) -> Result<Circuit, FamilyError> {
    let hadamard = |q: QubitId| [Op::gate(GateKind::Ry(FRAC_PI_2), &[q]), Op::gate(GateKind::Rx(PI), &[q])];
    let mut ops = Vec::with_capacity(circuit.ops().len() * 2);
    for op in circuit.ops() {
        match op {
            Op::Measure(_) => ops.push(op.clone()),
            Op::Gate { kind, targets } => {
                if targets.len() == 2 && !topology.has_edge(targets[0], targets[1]) {
                    return Err(FamilyError::NoRoute(targets[0], targets[1]));
                }
                match kind {
                    GateKind::H => ops.extend(hadamard(targets[0])),
                    GateKind::X => ops.push(Op::gate(GateKind::Rx(PI), targets)),
                    GateKind::Cx => {
                        let (c, t) = (targets[0], targets[1]);
                        ops.extend(hadamard(t));
                        ops.push(Op::gate(GateKind::Cz, &[c, t]));
                        ops.extend(hadamard(t));
                    }
                    _ => ops.push(op.clone()),
                }
            }
        }
    }
    Ok(Circuit::new(circuit.n_qubits(), ops, true)?)
}

/// Hub plus every nonempty subset of its neighbours, by size then
/// lexicographically.
pub fn enumerate_c3_subsets(topology: &Topology) -> Result<Vec<Vec<QubitId>>, FamilyError> {
    let hub = topology.hub().ok_or(FamilyError::NoHub)?;
    let leaves = topology.neighbors(hub);
    let mut out: Vec<Vec<QubitId>> = (1u32..(1 << leaves.len()))
        .map(|mask| {
            let mut s: Vec<QubitId> =
                leaves.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &q)| q).collect();
            s.push(hub);
            s.sort_unstable();
            s
        })
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

/// The full experiment grid: C1, C2, C4, C5 over every gate and qubit, and
/// C3 over every gate and star subset.
///
/// C2 appears as one all-qubit execution per gate, listed once per qubit
/// with `select` set to that qubit's stream.
pub fn enumerate_paper_grid(topology: &Topology) -> Result<Vec<CircuitSpec>, FamilyError> {
    let all: Vec<QubitId> = (0..topology.n_qubits()).collect();
    let subsets = enumerate_c3_subsets(topology)?;
    let mut grid = Vec::new();
    for family in FamilyId::ALL {
        for gate in GateChoice::ALL {
            match family {
                FamilyId::C2 => grid.extend(all.iter().map(|&q| CircuitSpec::new(family, gate, &all).with_select(q))),
                FamilyId::C3 => grid.extend(subsets.iter().map(|s| CircuitSpec::new(family, gate, s))),
                _ => grid.extend(all.iter().map(|&q| CircuitSpec::new(family, gate, &[q]))),
            }
        }
    }
    Ok(grid)
}
