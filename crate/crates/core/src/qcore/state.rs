use num_complex::Complex64;
use rand::Rng;

use super::{GateKind, Matrix, QcoreError, QubitId, MAX_QUBITS};

pub type Amplitude = Complex64;

/// Dense state vector. Basis index bit `k` holds qubit `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self, QcoreError> {
        if n_qubits > MAX_QUBITS {
            return Err(QcoreError::TooManyQubits(n_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Builds a state from raw amplitudes; length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self, QcoreError> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n {
            return Err(QcoreError::DimensionMismatch(amps.len(), 1 << n));
        }
        if n > MAX_QUBITS {
            return Err(QcoreError::TooManyQubits(n));
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule probability of every basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_targets(&self, gate: GateKind, targets: &[QubitId]) -> Result<(), QcoreError> {
        gate.validate()?;
        if targets.len() != gate.arity() {
            return Err(QcoreError::Arity { gate: gate.name(), expected: gate.arity(), got: targets.len() });
        }
        for &q in targets {
            if q >= self.n_qubits {
                return Err(QcoreError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
            }
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(QcoreError::DuplicateTarget(targets[0]));
        }
        Ok(())
    }

    /// In-place gate application.
    pub fn apply(&mut self, gate: GateKind, targets: &[QubitId]) -> Result<(), QcoreError> {
        self.check_targets(gate, targets)?;
        match gate {
            GateKind::Cz => self.apply_cphase(targets[0], targets[1], Complex64::new(-1.0, 0.0)),
            GateKind::Cx => self.apply_two(&gate.matrix(), targets[0], targets[1]),
            _ => self.apply_single(&gate.matrix(), targets[0]),
        }
        Ok(())
    }

    /// Applies a 2x2 matrix to `qubit`. Targets are not re-validated.
    pub(crate) fn apply_single(&mut self, m: &Matrix, qubit: QubitId) {
        let (m00, m01, m10, m11) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
        let mask = 1usize << qubit;
        for i in 0..self.amps.len() {
            if i & mask != 0 {
                continue;
            }
            let a0 = self.amps[i];
            let a1 = self.amps[i | mask];
            self.amps[i] = m00 * a0 + m01 * a1;
            self.amps[i | mask] = m10 * a0 + m11 * a1;
        }
    }

    /// Multiplies the `|11>` component of (`a`, `b`) by `phase`.
    pub(crate) fn apply_cphase(&mut self, a: QubitId, b: QubitId, phase: Complex64) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp *= phase;
            }
        }
    }

    fn apply_two(&mut self, m: &Matrix, q0: QubitId, q1: QubitId) {
        let (m0, m1) = (1usize << q0, 1usize << q1);
        for i in 0..self.amps.len() {
            if i & (m0 | m1) != 0 {
                continue;
            }
            let idx = [i, i | m0, i | m1, i | m0 | m1];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|c| m.get(r, c) * v[c]).sum();
            }
        }
    }

    /// Samples `qubits` by the Born rule and collapses the state in place.
    /// Returned bits follow the order of `qubits`.
    pub fn measure_in_place<R: Rng + ?Sized>(&mut self, qubits: &[QubitId], rng: &mut R) -> Result<Vec<u8>, QcoreError> {
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(QcoreError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
            }
            if qubits[..i].contains(&q) {
                return Err(QcoreError::DuplicateTarget(q));
            }
        }
        let outcome = self.sample_outcome(qubits, rng.random::<f64>())?;
        let bits: Vec<u8> = (0..qubits.len()).map(|t| ((outcome >> t) & 1) as u8).collect();
        self.project(qubits, &bits)?;
        Ok(bits)
    }

    /// Outcome index over `qubits` (bit `t` = `qubits[t]`) selected by the
    /// uniform variate `u` through the cumulative marginal.
    pub(crate) fn sample_outcome(&self, qubits: &[QubitId], u: f64) -> Result<usize, QcoreError> {
        let marginal = self.marginal(qubits);
        let total: f64 = marginal.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(QcoreError::ZeroNorm);
        }
        let target = u * total;
        let mut acc = 0.0;
        let mut last_nonzero = 0;
        for (j, p) in marginal.iter().enumerate() {
            if *p > 0.0 {
                last_nonzero = j;
                acc += p;
                if target < acc {
                    return Ok(j);
                }
            }
        }
        Ok(last_nonzero)
    }

    /// Marginal distribution over `qubits`, indexed with bit `t` = `qubits[t]`.
    pub fn marginal(&self, qubits: &[QubitId]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            out[outcome_index(i, qubits)] += p;
        }
        out
    }

    pub(crate) fn project(&mut self, qubits: &[QubitId], bits: &[u8]) -> Result<(), QcoreError> {
        let mut keep = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            let matches = qubits.iter().zip(bits).all(|(&q, &b)| ((i >> q) & 1) as u8 == b);
            if matches {
                keep += a.norm_sqr();
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        if !(keep > 0.0) {
            return Err(QcoreError::ZeroNorm);
        }
        let scale = 1.0 / keep.sqrt();
        for a in &mut self.amps {
            *a *= scale;
        }
        Ok(())
    }
}

pub(crate) fn outcome_index(basis: usize, qubits: &[QubitId]) -> usize {
    qubits.iter().enumerate().fold(0, |acc, (t, &q)| acc | (((basis >> q) & 1) << t))
}

/// Returns the state after applying `gate` to `targets`.
pub fn apply_gate(state: &StateVector, gate: GateKind, targets: &[QubitId]) -> Result<StateVector, QcoreError> {
    let mut out = state.clone();
    out.apply(gate, targets)?;
    Ok(out)
}

/// Measures `qubits`, returning the outcome bits and the collapsed state.
pub fn measure<R: Rng + ?Sized>(
    state: &StateVector,
    qubits: &[QubitId],
    rng: &mut R,
) -> Result<(Vec<u8>, StateVector), QcoreError> {
    let mut out = state.clone();
    let bits = out.measure_in_place(qubits, rng)?;
    Ok((bits, out))
}
