//! Shot-level execution of native circuits under a calibrated noise model.
//!
//! Every shot draws from its own ChaCha8 stream selected by the shot index,
//! so a table depends only on `(circuit, shots, noise, seed)` and never on
//! how shots were split across threads.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::CircuitSpec;
use crate::par::{self, Exec};
use crate::qcore::{CalibrationSnapshot, Circuit, GateKind, Matrix, Op, QcoreError, QubitId, StateVector, MAX_QUBITS};

/// Assignment errors of one qubit's readout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadoutError {
    /// Pr(report 0 | true 1).
    pub p01: f64,
    /// Pr(report 1 | true 0).
    pub p10: f64,
}

impl ReadoutError {
    pub fn flip(self, true_bit: u8, u: f64) -> u8 {
        let p = if true_bit == 1 { self.p01 } else { self.p10 };
        if u < p {
            true_bit ^ 1
        } else {
            true_bit
        }
    }
}

/// Coherent over-rotation added to every gate of a kind. For `cz` the error
/// is added to the conditional phase `pi`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AngleError {
    #[serde(default)]
    pub rx: f64,
    #[serde(default)]
    pub ry: f64,
    #[serde(default)]
    pub cz: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// Indexed by qubit id; qubits past the end read out perfectly.
    #[serde(default)]
    pub readout: Vec<ReadoutError>,
    #[serde(default)]
    pub gate_angle_error: AngleError,
    /// Probability of a uniformly random Pauli after each gate, per target.
    #[serde(default)]
    pub depolarizing_p: f64,
}

impl NoiseProfile {
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Readout confusion taken from calibration; no gate noise.
    pub fn from_calibration(calib: &CalibrationSnapshot) -> Self {
        NoiseProfile {
            readout: calib.qubits().iter().map(|c| ReadoutError { p01: c.p01, p10: c.p10 }).collect(),
            ..Self::default()
        }
    }

    pub fn readout_for(&self, q: QubitId) -> ReadoutError {
        self.readout.get(q).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        for (q, r) in self.readout.iter().enumerate() {
            if !in_unit(r.p01) || !in_unit(r.p10) {
                return Err(SimError::BadNoise(format!("readout probabilities of qubit {q} outside [0,1]")));
            }
        }
        if !in_unit(self.depolarizing_p) {
            return Err(SimError::BadNoise("depolarizing_p outside [0,1]".into()));
        }
        let e = self.gate_angle_error;
        if ![e.rx, e.ry, e.cz].iter().all(|x| x.is_finite()) {
            return Err(SimError::BadNoise("non-finite gate angle error".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("circuit contains non-native gates; transpile first")]
    NotNative,
    #[error("{0} qubits exceed the simulator limit")]
    TooManyQubits(usize),
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("invalid noise profile: {0}")]
    BadNoise(String),
    #[error("distribution length {got} does not match {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("distribution sums to {0}, not 1")]
    NotNormalized(f64),
    #[error("malformed shot table: {0}")]
    Malformed(String),
    #[error(transparent)]
    State(#[from] QcoreError),
}

/// Measured bits of every shot.
///
/// Each shot is a fixed-width record: the bits of every measurement event in
/// time order, each event's bits in the order of its qubit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotTable {
    pub spec: Option<CircuitSpec>,
    /// Centre qubit for GHZ tables.
    pub ghz_source: Option<QubitId>,
    events: Vec<Vec<QubitId>>,
    width: usize,
    bits: Vec<u8>,
    pub seed: u64,
}

impl ShotTable {
    pub fn new(events: Vec<Vec<QubitId>>, bits: Vec<u8>, seed: u64) -> Result<Self, SimError> {
        let width: usize = events.iter().map(Vec::len).sum();
        if width == 0 {
            return Err(SimError::Malformed("no measured bits".into()));
        }
        if bits.len() % width != 0 {
            return Err(SimError::Malformed(format!("{} bits is not a multiple of record width {width}", bits.len())));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(SimError::Malformed("non-binary value".into()));
        }
        Ok(ShotTable { spec: None, ghz_source: None, events, width, bits, seed })
    }

    pub fn with_spec(mut self, spec: CircuitSpec, ghz_source: Option<QubitId>) -> Self {
        self.spec = Some(spec);
        self.ghz_source = ghz_source;
        self
    }

    pub fn shots(&self) -> usize {
        self.bits.len() / self.width
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn events(&self) -> &[Vec<QubitId>] {
        &self.events
    }

    /// Distinct measured qubits, ascending.
    pub fn qubit_order(&self) -> Vec<QubitId> {
        let mut q: Vec<QubitId> = self.events.iter().flatten().copied().collect();
        q.sort_unstable();
        q.dedup();
        q
    }

    pub fn shot(&self, i: usize) -> &[u8] {
        &self.bits[i * self.width..(i + 1) * self.width]
    }

    pub fn iter_shots(&self) -> impl Iterator<Item = &[u8]> {
        self.bits.chunks_exact(self.width)
    }

    /// Offset of event `e` inside a shot record.
    pub fn event_offset(&self, e: usize) -> usize {
        self.events[..e].iter().map(Vec::len).sum()
    }

    /// Outcome counts of event `e`, indexed with bit `t` = `events[e][t]`.
    pub fn histogram(&self, e: usize) -> Vec<u64> {
        let off = self.event_offset(e);
        let len = self.events[e].len();
        let mut h = vec![0u64; 1 << len];
        for shot in self.iter_shots() {
            let idx = shot[off..off + len].iter().enumerate().fold(0usize, |a, (t, &b)| a | ((b as usize) << t));
            h[idx] += 1;
        }
        h
    }

    /// Fraction of ones over every measured bit.
    pub fn raw_ones_fraction(&self) -> f64 {
        self.bits.iter().map(|&b| b as u64).sum::<u64>() as f64 / self.bits.len() as f64
    }

    /// Text dump: header comments, then one line per shot with events
    /// separated by a space.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let order: Vec<String> = self.qubit_order().iter().map(|q| q.to_string()).collect();
        let _ = writeln!(s, "# qubits: {}", order.join(" "));
        let ev: Vec<String> = self.events.iter().map(|e| e.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ")).collect();
        let _ = writeln!(s, "# events: [{}]", ev.join("] ["));
        let _ = writeln!(s, "# seed: {}", self.seed);
        for shot in self.iter_shots() {
            let mut pos = 0;
            for (k, e) in self.events.iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                s.extend(shot[pos..pos + e.len()].iter().map(|&b| if b == 1 { '1' } else { '0' }));
                pos += e.len();
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug)]
enum Step {
    Single { qubit: QubitId, m: Matrix },
    CPhase { a: QubitId, b: QubitId, phase: Complex64 },
    Measure { qubits: Vec<QubitId> },
}

struct Program {
    n_qubits: usize,
    steps: Vec<Step>,
    readout: Vec<ReadoutError>,
    depolarizing_p: f64,
    /// State just before the first measurement and the step index there,
    /// valid when gate noise is deterministic.
    prefix: Option<(StateVector, usize)>,
    width: usize,
}

impl Program {
    fn compile(circuit: &Circuit, noise: &NoiseProfile) -> Result<Self, SimError> {
        let err = noise.gate_angle_error;
        let mut steps = Vec::new();
        for op in circuit.ops() {
            match op {
                Op::Gate { kind, targets } => match *kind {
                    GateKind::Rx(t) => steps.push(Step::Single { qubit: targets[0], m: GateKind::Rx(t + err.rx).matrix() }),
                    GateKind::Ry(t) => steps.push(Step::Single { qubit: targets[0], m: GateKind::Ry(t + err.ry).matrix() }),
                    GateKind::Cz => steps.push(Step::CPhase {
                        a: targets[0],
                        b: targets[1],
                        phase: Complex64::from_polar(1.0, std::f64::consts::PI + err.cz),
                    }),
                    _ => return Err(SimError::NotNative),
                },
                Op::Measure(qs) => steps.push(Step::Measure { qubits: qs.clone() }),
            }
        }
        let readout = (0..circuit.n_qubits()).map(|q| noise.readout_for(q)).collect();
        let width = circuit.measure_events().iter().map(Vec::len).sum();
        let mut prog =
            Program { n_qubits: circuit.n_qubits(), steps, readout, depolarizing_p: noise.depolarizing_p, prefix: None, width };
        if prog.depolarizing_p == 0.0 {
            let first = prog.steps.iter().position(|s| matches!(s, Step::Measure { .. })).unwrap_or(prog.steps.len());
            let mut state = StateVector::zero(prog.n_qubits)?;
            for step in &prog.steps[..first] {
                apply_step(&mut state, step);
            }
            prog.prefix = Some((state, first));
        }
        Ok(prog)
    }

    fn shot<R: Rng>(&self, rng: &mut R, out: &mut Vec<u8>) -> Result<(), SimError> {
        let (mut state, start) = match &self.prefix {
            Some((s, k)) => (s.clone(), *k),
            None => (StateVector::zero(self.n_qubits)?, 0),
        };
        for (k, step) in self.steps.iter().enumerate().skip(start) {
            match step {
                Step::Measure { qubits } => {
                    let outcome = state.sample_outcome(qubits, rng.random::<f64>())?;
                    let truth: Vec<u8> = (0..qubits.len()).map(|t| ((outcome >> t) & 1) as u8).collect();
                    if k + 1 < self.steps.len() {
                        state.project(qubits, &truth)?;
                    }
                    for (&q, &b) in qubits.iter().zip(&truth) {
                        out.push(self.readout[q].flip(b, rng.random::<f64>()));
                    }
                }
                _ => {
                    apply_step(&mut state, step);
                    if self.depolarizing_p > 0.0 {
                        let targets: &[QubitId] = match step {
                            Step::Single { qubit, .. } => std::slice::from_ref(qubit),
                            Step::CPhase { a, b, .. } => &[*a, *b],
                            Step::Measure { .. } => unreachable!(),
                        };
                        for &q in targets {
                            if rng.random::<f64>() < self.depolarizing_p {
                                let pauli = match rng.random_range(0..3u8) {
                                    0 => GateKind::Rx(std::f64::consts::PI),
                                    1 => GateKind::Ry(std::f64::consts::PI),
                                    _ => {
                                        // Z up to phase
                                        state.apply_single(&z_matrix(), q);
                                        continue;
                                    }
                                };
                                state.apply_single(&pauli.matrix(), q);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn z_matrix() -> Matrix {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    Matrix::from_rows(2, vec![one, zero, zero, -one])
}

fn apply_step(state: &mut StateVector, step: &Step) {
    match step {
        Step::Single { qubit, m } => state.apply_single(m, *qubit),
        Step::CPhase { a, b, phase } => state.apply_cphase(*a, *b, *phase),
        Step::Measure { .. } => {}
    }
}

const CHUNK: usize = 8192;

/// Executes `circuit` for `shots` shots.
pub fn run(circuit: &Circuit, shots: usize, noise: &NoiseProfile, seed: u64) -> Result<ShotTable, SimError> {
    run_with(circuit, shots, noise, seed, Exec::default())
}

pub fn run_with(circuit: &Circuit, shots: usize, noise: &NoiseProfile, seed: u64, exec: Exec) -> Result<ShotTable, SimError> {
    if !circuit.native_only() && circuit.gates().any(|(k, _)| !k.is_native()) {
        return Err(SimError::NotNative);
    }
    if circuit.n_qubits() > MAX_QUBITS {
        return Err(SimError::TooManyQubits(circuit.n_qubits()));
    }
    if shots == 0 {
        return Err(SimError::ZeroShots);
    }
    noise.validate()?;
    let prog = Program::compile(circuit, noise)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let chunks = shots.div_ceil(CHUNK);
    let parts = par::map_range(exec, chunks, |c| -> Result<Vec<u8>, SimError> {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(shots);
        let mut out = Vec::with_capacity((hi - lo) * prog.width);
        for shot in lo..hi {
            let mut rng = base.clone();
            rng.set_stream(shot as u64);
            prog.shot(&mut rng, &mut out)?;
        }
        Ok(out)
    });
    let mut bits = Vec::with_capacity(shots * prog.width);
    for part in parts {
        bits.extend(part?);
    }
    ShotTable::new(circuit.measure_events(), bits, seed)
}

/// Pushes an ideal outcome distribution over `qubits` (bit `t` of the index
/// is `qubits[t]`) through each qubit's readout confusion matrix.
pub fn predicted_distribution(ideal: &[f64], noise: &NoiseProfile, qubits: &[QubitId]) -> Result<Vec<f64>, SimError> {
    let expected = 1usize << qubits.len();
    if ideal.len() != expected {
        return Err(SimError::LengthMismatch { expected, got: ideal.len() });
    }
    let total: f64 = ideal.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SimError::NotNormalized(total));
    }
    let mut dist = ideal.to_vec();
    for (t, &q) in qubits.iter().enumerate() {
        let r = noise.readout_for(q);
        let mask = 1usize << t;
        for j in 0..expected {
            if j & mask != 0 {
                continue;
            }
            let (p0, p1) = (dist[j], dist[j | mask]);
            dist[j] = (1.0 - r.p10) * p0 + r.p01 * p1;
            dist[j | mask] = r.p10 * p0 + (1.0 - r.p01) * p1;
        }
    }
    Ok(dist)
}

/// Noise-free outcome distribution of a circuit's final state over `qubits`.
pub fn ideal_distribution(circuit: &Circuit, qubits: &[QubitId]) -> Vec<f64> {
    circuit.final_state().marginal(qubits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build, transpile, FamilyId, GateChoice};
    use crate::qcore::Topology;

    fn native(spec: &CircuitSpec) -> Circuit {
        let t = Topology::spark();
        transpile(&build(spec, &t).unwrap(), &t).unwrap()
    }

    fn readout_all(p01: f64, p10: f64) -> NoiseProfile {
        NoiseProfile { readout: vec![ReadoutError { p01, p10 }; 5], ..Default::default() }
    }

    #[test]
    fn rejects_abstract_and_zero_shots() {
        let t = Topology::spark();
        let abs = build(&CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]), &t).unwrap();
        assert_eq!(run(&abs, 10, &NoiseProfile::ideal(), 1), Err(SimError::NotNative));
        let c = native(&CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]));
        assert_eq!(run(&c, 0, &NoiseProfile::ideal(), 1), Err(SimError::ZeroShots));
        assert!(matches!(run(&c, 1, &readout_all(1.5, 0.0), 1), Err(SimError::BadNoise(_))));
    }

    #[test]
    fn ideal_c1_ones_fraction() {
        let c = native(&CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]));
        let t = run(&c, 1_000_000, &NoiseProfile::ideal(), 5).unwrap();
        assert!((t.raw_ones_fraction() - 0.5).abs() <= 0.0015);
    }

    #[test]
    fn confusion_shifts_c1() {
        let c = native(&CircuitSpec::new(FamilyId::C1, GateChoice::Rx, &[0]));
        let t = run(&c, 1_000_000, &readout_all(0.04, 0.02), 6).unwrap();
        assert!((t.raw_ones_fraction() - 0.49).abs() <= 0.0015, "{}", t.raw_ones_fraction());
    }

    #[test]
    fn deterministic_and_partition_independent() {
        let c = native(&CircuitSpec::new(FamilyId::C3, GateChoice::Ry, &[0, 2, 3]));
        let noise = NoiseProfile { depolarizing_p: 0.01, ..readout_all(0.05, 0.02) };
        let a = run_with(&c, 20_000, &noise, 77, Exec::Sequential).unwrap();
        let b = run_with(&c, 20_000, &noise, 77, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        // a prefix of a longer run is the shorter run
        let small = run_with(&c, 5000, &noise, 77, Exec::Parallel).unwrap();
        assert_eq!(small.shot(4999), a.shot(4999));
        assert_ne!(run(&c, 20_000, &noise, 78).unwrap(), a);
    }

    #[test]
    fn c5_records_two_events() {
        let c = native(&CircuitSpec::new(FamilyId::C5, GateChoice::Ry, &[3]));
        let t = run(&c, 1000, &NoiseProfile::ideal(), 2).unwrap();
        assert_eq!(t.events(), &[vec![3], vec![3]]);
        assert_eq!(t.width(), 2);
        let dump = t.dump();
        assert!(dump.starts_with("# qubits: 3\n# events: [3] [3]\n# seed: 2\n"));
        assert_eq!(dump.lines().count(), 1003);
    }

    #[test]
    fn ideal_ghz_never_mixed() {
        let c = native(&CircuitSpec::new(FamilyId::C3, GateChoice::H, &[0, 1, 2, 3, 4]));
        let t = run(&c, 20_000, &NoiseProfile::ideal(), 9).unwrap();
        let h = t.histogram(0);
        assert_eq!(h[0] + h[31], 20_000);
    }

    #[test]
    fn predicted_single_qubit() {
        let p = predicted_distribution(&[0.5, 0.5], &readout_all(0.04, 0.02), &[0]).unwrap();
        assert!((p[1] - 0.49).abs() < 1e-15);
        let same = predicted_distribution(&[0.3, 0.7], &NoiseProfile::ideal(), &[1]).unwrap();
        assert_eq!(same, vec![0.3, 0.7]);
        assert!(matches!(
            predicted_distribution(&[0.5, 0.5], &NoiseProfile::ideal(), &[0, 1]),
            Err(SimError::LengthMismatch { .. })
        ));
        assert!(matches!(predicted_distribution(&[0.5, 0.6], &NoiseProfile::ideal(), &[0]), Err(SimError::NotNormalized(_))));
    }

    #[test]
    fn predicted_bell_matches_enumeration() {
        let noise = NoiseProfile {
            readout: vec![ReadoutError { p01: 0.07, p10: 0.01 }, ReadoutError::default(), ReadoutError { p01: 0.03, p10: 0.05 }],
            ..Default::default()
        };
        let qubits = [0, 2];
        let ideal = [0.5, 0.0, 0.0, 0.5];
        // Oracle: sum over 4 true states x 4 flip patterns.
        let mut oracle = [0.0; 4];
        for (truth, &pt) in ideal.iter().enumerate() {
            for flips in 0..4usize {
                let mut p = pt;
                for (t, &q) in qubits.iter().enumerate() {
                    let r = noise.readout_for(q);
                    let b = (truth >> t) & 1;
                    let flip_p = if b == 1 { r.p01 } else { r.p10 };
                    p *= if (flips >> t) & 1 == 1 { flip_p } else { 1.0 - flip_p };
                }
                oracle[truth ^ flips] += p;
            }
        }
        let got = predicted_distribution(&ideal, &noise, &qubits).unwrap();
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-15);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_converges_to_prediction() {
        let noise = NoiseProfile {
            readout: vec![
                ReadoutError { p01: 0.08, p10: 0.02 },
                ReadoutError::default(),
                ReadoutError { p01: 0.03, p10: 0.06 },
                ReadoutError { p01: 0.1, p10: 0.0 },
                ReadoutError::default(),
            ],
            ..Default::default()
        };
        let c = native(&CircuitSpec::new(FamilyId::C3, GateChoice::Rx, &[0, 2, 3]));
        let n = 100_000;
        let t = run(&c, n, &noise, 123).unwrap();
        let pred = predicted_distribution(&ideal_distribution(&c, &[0, 2, 3]), &noise, &[0, 2, 3]).unwrap();
        for (count, p) in t.histogram(0).iter().zip(&pred) {
            let f = *count as f64 / n as f64;
            assert!((f - p).abs() <= 5.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-12, "{f} vs {p}");
        }
    }

    #[test]
    fn over_rotation_biases_output() {
        // Ry(pi/2 + eps) on |0> gives P(1) = sin^2((pi/2+eps)/2)
        let eps = 0.1;
        let noise = NoiseProfile { gate_angle_error: AngleError { ry: eps, ..Default::default() }, ..Default::default() };
        let c = native(&CircuitSpec::new(FamilyId::C1, GateChoice::Ry, &[1]));
        let t = run(&c, 200_000, &noise, 4).unwrap();
        let p = ((std::f64::consts::FRAC_PI_2 + eps) / 2.0).sin().powi(2);
        assert!((t.raw_ones_fraction() - p).abs() < 4.0 * (p * (1.0 - p) / 200_000.0f64).sqrt());
    }

    #[test]
    fn full_depolarizing_randomizes_basis_state() {
        // C4 with gate removed is not expressible; use X-only circuit via ops.
        let c = Circuit::new(1, vec![Op::gate(GateKind::Rx(std::f64::consts::PI), &[0]), Op::Measure(vec![0])], true).unwrap();
        let noise = NoiseProfile { depolarizing_p: 1.0, ..Default::default() };
        let t = run(&c, 30_000, &noise, 8).unwrap();
        // X, Y flip back to |0>, Z keeps |1>: P(1) = 1/3
        assert!((t.raw_ones_fraction() - 1.0 / 3.0).abs() < 0.01);
    }
}
