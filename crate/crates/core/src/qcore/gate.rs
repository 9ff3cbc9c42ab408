use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::QcoreError;

/// Gate alphabet. `H`, `X` and `Cx` are abstract forms that the transpiler
/// rewrites into the native `Rx`, `Ry`, `Cz` set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", content = "angle", rename_all = "lowercase")]
pub enum GateKind {
    Rx(f64),
    Ry(f64),
    Cz,
    H,
    X,
    Cx,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cz | GateKind::Cx => 2,
            _ => 1,
        }
    }

    pub fn is_native(self) -> bool {
        matches!(self, GateKind::Rx(_) | GateKind::Ry(_) | GateKind::Cz)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx(_) => "RX",
            GateKind::Ry(_) => "RY",
            GateKind::Cz => "CZ",
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Cx => "CX",
        }
    }

    pub fn angle(self) -> Option<f64> {
        match self {
            GateKind::Rx(t) | GateKind::Ry(t) => Some(t),
            _ => None,
        }
    }

    pub(crate) fn validate(self) -> Result<(), QcoreError> {
        match self.angle() {
            Some(t) if !t.is_finite() => Err(QcoreError::NonFiniteAngle),
            _ => Ok(()),
        }
    }

    /// Row-major unitary. Two-qubit gates use basis index `b0 + 2*b1`
    /// where `b0` is the first target (the control for `Cx`).
    pub fn matrix(self) -> Matrix {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            GateKind::Rx(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                Matrix::from_rows(2, vec![c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
            }
            GateKind::Ry(t) => {
                let (s, co) = (t / 2.0).sin_cos();
                Matrix::from_rows(2, vec![c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
            }
            GateKind::H => {
                let h = FRAC_1_SQRT_2;
                Matrix::from_rows(2, vec![c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
            }
            GateKind::X => Matrix::from_rows(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            GateKind::Cz => {
                let mut m = Matrix::identity(4);
                m.set(3, 3, c(-1.0, 0.0));
                m
            }
            GateKind::Cx => {
                // control = bit 0, target = bit 1: swaps |01> (idx 1) and |11> (idx 3)
                let mut m = Matrix::zeros(4);
                m.set(0, 0, c(1.0, 0.0));
                m.set(2, 2, c(1.0, 0.0));
                m.set(1, 3, c(1.0, 0.0));
                m.set(3, 1, c(1.0, 0.0));
                m
            }
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.angle() {
            Some(t) => write!(f, "{}({:.6})", self.name(), t),
            None => f.write_str(self.name()),
        }
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Panics if `data.len() != dim * dim`.
    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), dim * dim, "matrix data length");
        Matrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix, QcoreError> {
        if self.dim != rhs.dim {
            return Err(QcoreError::DimensionMismatch(self.dim, rhs.dim));
        }
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64, QcoreError> {
        if self.dim != other.dim {
            return Err(QcoreError::DimensionMismatch(self.dim, other.dim));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// True iff some phase `φ` makes every entry of `u - e^{iφ} v` at most `tol`
/// in modulus. The phase is read off the largest-magnitude entry of `v`.
pub fn equal_up_to_global_phase(u: &Matrix, v: &Matrix, tol: f64) -> Result<bool, QcoreError> {
    if u.dim != v.dim {
        return Err(QcoreError::DimensionMismatch(u.dim, v.dim));
    }
    let (k, vk) = v
        .data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(k, z)| (k, *z))
        .unwrap_or((0, Complex64::new(0.0, 0.0)));
    if vk.norm() == 0.0 {
        return Ok(u.data.iter().all(|z| z.norm() <= tol));
    }
    let ratio = u.data[k] / vk;
    if ratio.norm() == 0.0 {
        return Ok(false);
    }
    let phase = ratio / ratio.norm();
    Ok(u.data.iter().zip(&v.data).all(|(a, b)| (a - phase * b).norm() <= tol))
}
