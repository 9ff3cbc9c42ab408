//! Bitstreams extracted from shot tables, and their on-disk formats.
//!
//! Packed files store stream bit `8b + i` in bit `i` of byte `b`
//! (least significant bit first); trailing bits of the last byte are zero.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{CircuitSpec, FamilyId};
use crate::qcore::QubitId;
use crate::simnoise::ShotTable;

#[derive(Debug, Error)]
pub enum BitsError {
    #[error("policy {policy:?} cannot be applied to {family:?} data")]
    PolicyMismatch { policy: ExtractionPolicy, family: Option<FamilyId> },
    #[error("qubit {0} is not measured exactly once per shot")]
    QubitNotMeasuredOnce(QubitId),
    #[error("GHZ source qubit unknown for this table")]
    NoSource,
    #[error("empty bitstream")]
    Empty,
    #[error("source holds {got} bits, expected {expected}")]
    Truncated { expected: usize, got: usize },
    #[error("invalid character {0:?} in ASCII bitstream")]
    BadChar(char),
    #[error("value {0} is not a bit")]
    NotABit(u8),
    #[error("metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Immutable finite bit sequence, one byte (0 or 1) per bit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitStream {
    bits: Vec<u8>,
}

impl BitStream {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self, BitsError> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(BitsError::NotABit(b));
        }
        Ok(BitStream { bits })
    }

    /// From booleans; never fails.
    pub fn from_bools<I: IntoIterator<Item = bool>>(it: I) -> Self {
        BitStream { bits: it.into_iter().map(u8::from).collect() }
    }

    /// `'0'`/`'1'` characters; whitespace is ignored.
    pub fn from_ascii(s: &str) -> Result<Self, BitsError> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(0),
                '1' => bits.push(1),
                c if c.is_whitespace() => {}
                c => return Err(BitsError::BadChar(c)),
            }
        }
        Ok(BitStream { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn complement(&self) -> BitStream {
        BitStream { bits: self.bits.iter().map(|b| b ^ 1).collect() }
    }

    pub fn to_ascii(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// First `n` bits (or all of them).
    pub fn prefix(&self, n: usize) -> BitStream {
        BitStream { bits: self.bits[..n.min(self.bits.len())].to_vec() }
    }
}

/// How a shot table is turned into one bitstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionPolicy {
    /// One bit per shot from the given qubit.
    SingleQubit(QubitId),
    /// Every bit of each shot, measured qubits in ascending id order.
    Flatten,
    /// Majority vote across a GHZ outcome; ties go to the source qubit.
    C3Majority,
    /// The GHZ source qubit's bit.
    C3Source,
    /// Every measurement of a repeated circuit in time order.
    C5TimeOrder,
}

impl ExtractionPolicy {
    /// SingleQubit for C1/C4 and selected C2 streams, Flatten for C2,
    /// C3Majority for C3, C5TimeOrder for C5.
    pub fn default_for(spec: &CircuitSpec) -> ExtractionPolicy {
        match spec.family {
            FamilyId::C1 | FamilyId::C4 => ExtractionPolicy::SingleQubit(spec.qubits[0]),
            FamilyId::C2 => spec.select.map_or(ExtractionPolicy::Flatten, ExtractionPolicy::SingleQubit),
            FamilyId::C3 => ExtractionPolicy::C3Majority,
            FamilyId::C5 => ExtractionPolicy::C5TimeOrder,
        }
    }
}

/// Turns a shot table into a bitstream under `policy`.
pub fn extract(table: &ShotTable, policy: ExtractionPolicy) -> Result<BitStream, BitsError> {
    let family = table.spec.as_ref().map(|s| s.family);
    let mismatch = || BitsError::PolicyMismatch { policy, family };
    let shots = table.shots();
    let mut out = Vec::new();
    match policy {
        ExtractionPolicy::SingleQubit(q) => {
            let pos = unique_position(table, q)?;
            out.reserve(shots);
            out.extend(table.iter_shots().map(|s| s[pos]));
        }
        ExtractionPolicy::Flatten => {
            // record positions sorted by (event, qubit id)
            let mut order = Vec::with_capacity(table.width());
            for (e, qs) in table.events().iter().enumerate() {
                let off = table.event_offset(e);
                let mut idx: Vec<usize> = (0..qs.len()).collect();
                idx.sort_by_key(|&t| qs[t]);
                order.extend(idx.into_iter().map(|t| off + t));
            }
            out.reserve(shots * order.len());
            for s in table.iter_shots() {
                out.extend(order.iter().map(|&p| s[p]));
            }
        }
        ExtractionPolicy::C3Majority | ExtractionPolicy::C3Source => {
            if family != Some(FamilyId::C3) || table.events().len() != 1 {
                return Err(mismatch());
            }
            let src = table.ghz_source.ok_or(BitsError::NoSource)?;
            let src_pos = unique_position(table, src)?;
            let n = table.width();
            out.reserve(shots);
            for s in table.iter_shots() {
                let bit = if policy == ExtractionPolicy::C3Source {
                    s[src_pos]
                } else {
                    let ones: usize = s.iter().map(|&b| b as usize).sum();
                    match (2 * ones).cmp(&n) {
                        std::cmp::Ordering::Greater => 1,
                        std::cmp::Ordering::Less => 0,
                        std::cmp::Ordering::Equal => s[src_pos],
                    }
                };
                out.push(bit);
            }
        }
        ExtractionPolicy::C5TimeOrder => {
            if family != Some(FamilyId::C5) {
                return Err(mismatch());
            }
            out.reserve(shots * table.width());
            for s in table.iter_shots() {
                out.extend_from_slice(s);
            }
        }
    }
    Ok(BitStream { bits: out })
}

fn unique_position(table: &ShotTable, q: QubitId) -> Result<usize, BitsError> {
    let mut found = None;
    for (e, qs) in table.events().iter().enumerate() {
        for (t, &x) in qs.iter().enumerate() {
            if x == q {
                if found.is_some() {
                    return Err(BitsError::QubitNotMeasuredOnce(q));
                }
                found = Some(table.event_offset(e) + t);
            }
        }
    }
    found.ok_or(BitsError::QubitNotMeasuredOnce(q))
}

/// Count of ones divided by length.
pub fn ones_fraction(stream: &BitStream) -> Result<f64, BitsError> {
    if stream.is_empty() {
        return Err(BitsError::Empty);
    }
    Ok(stream.ones() as f64 / stream.len() as f64)
}

pub fn pack(stream: &BitStream) -> Vec<u8> {
    let mut bytes = vec![0u8; stream.len().div_ceil(8)];
    for (i, &b) in stream.bits.iter().enumerate() {
        bytes[i / 8] |= b << (i % 8);
    }
    bytes
}

pub fn unpack(bytes: &[u8], length: usize) -> Result<BitStream, BitsError> {
    if bytes.len() * 8 < length {
        return Err(BitsError::Truncated { expected: length, got: bytes.len() * 8 });
    }
    Ok(BitStream { bits: (0..length).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect() })
}

pub fn write_packed<W: Write>(stream: &BitStream, sink: &mut W) -> io::Result<()> {
    sink.write_all(&pack(stream))
}

pub fn read_packed<R: Read>(source: &mut R, length: usize) -> Result<BitStream, BitsError> {
    let mut bytes = vec![0u8; length.div_ceil(8)];
    let mut got = 0;
    while got < bytes.len() {
        match source.read(&mut bytes[got..])? {
            0 => break,
            k => got += k,
        }
    }
    if got < bytes.len() {
        return Err(BitsError::Truncated { expected: length, got: got * 8 });
    }
    unpack(&bytes, length)
}

pub fn read_ascii<R: Read>(source: &mut R) -> Result<BitStream, BitsError> {
    let mut s = String::new();
    source.read_to_string(&mut s)?;
    BitStream::from_ascii(&s)
}

/// Sidecar record stored next to every `.bin` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub length: usize,
    pub spec: Option<CircuitSpec>,
    pub seed: u64,
    pub policy: Option<ExtractionPolicy>,
}

/// `foo.bin` -> `foo.meta.json`.
pub fn meta_path(bin: &Path) -> PathBuf {
    bin.with_extension("meta.json")
}

pub fn save_bin(path: &Path, stream: &BitStream, meta: &StreamMeta) -> Result<(), BitsError> {
    fs::write(path, pack(stream))?;
    fs::write(meta_path(path), serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

/// Loads a `.bin` file; the length comes from the sidecar.
pub fn load_bin(path: &Path) -> Result<(BitStream, StreamMeta), BitsError> {
    let meta: StreamMeta = serde_json::from_slice(&fs::read(meta_path(path))?)?;
    let bytes = fs::read(path)?;
    let stream = unpack(&bytes, meta.length)?;
    Ok((stream, meta))
}

/// Loads `.bin` (with sidecar) or ASCII (`.txt` or anything else).
pub fn load_any(path: &Path) -> Result<BitStream, BitsError> {
    if path.extension().is_some_and(|e| e == "bin") {
        Ok(load_bin(path)?.0)
    } else {
        read_ascii(&mut fs::File::open(path)?)
    }
}
