//! Maurer's universal statistical test.

use super::Outcome;
use crate::special::erfc;

const EXPECTED: [f64; 11] = [
    5.2177052, 6.1962507, 7.1836656, 8.1764248, 9.1723243, 10.170032, 11.168765, 12.168070, 13.167693, 14.167488,
    15.167379,
];
const VARIANCE: [f64; 11] = [2.954, 3.125, 3.238, 3.311, 3.356, 3.384, 3.401, 3.410, 3.416, 3.419, 3.421];
/// Minimum length for block lengths 6, 7, ..., 16.
const MIN_N: [usize; 11] = [
    387_840,
    904_960,
    2_068_480,
    4_654_080,
    10_342_400,
    22_753_280,
    49_643_520,
    107_560_960,
    231_669_760,
    496_435_200,
    1_059_061_760,
];

/// Block length and initialization segment size chosen for `n` bits, or
/// `None` when `n` is too short for the smallest tabulated block length.
pub fn universal_defaults(n: usize) -> Option<(usize, usize)> {
    let idx = MIN_N.iter().rposition(|&min| n >= min)?;
    let l = idx + 6;
    Some((l, 10 << l))
}

pub(super) fn universal(eps: &[u8], l: Option<usize>, q: Option<usize>) -> Outcome {
    let Some((auto_l, auto_q)) = universal_defaults(eps.len()) else {
        if let (Some(l), Some(q)) = (l, q) {
            if eps.len() / l > q {
                return universal_raw(eps, l, q);
            }
        }
        return Outcome::na();
    };
    let l = l.unwrap_or(auto_l);
    let q = q.unwrap_or(if l == auto_l { auto_q } else { 10 << l });
    if eps.len() / l <= q {
        return Outcome::na();
    }
    universal_raw(eps, l, q)
}

pub(super) fn universal_raw(eps: &[u8], l: usize, q: usize) -> Outcome {
    let blocks = eps.len() / l;
    let k = blocks - q;
    let mut last = vec![0usize; 1 << l];
    let value = |i: usize| eps[i * l..(i + 1) * l].iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    for i in 0..q {
        last[value(i)] = i + 1;
    }
    let mut sum = 0.0;
    for i in q..blocks {
        let v = value(i);
        sum += ((i + 1 - last[v]) as f64).log2();
        last[v] = i + 1;
    }
    let kf = k as f64;
    let lf = l as f64;
    let phi = sum / kf;
    let c = 0.7 - 0.8 / lf + (4.0 + 32.0 / lf) * kf.powf(-3.0 / lf) / 15.0;
    let sigma = c * (VARIANCE[l - 6] / kf).sqrt();
    let p = erfc((phi - EXPECTED[l - 6]).abs() / (std::f64::consts::SQRT_2 * sigma));
    Outcome::new(p, phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_by_length() {
        assert_eq!(universal_defaults(1_000_000), Some((7, 1280)));
        assert_eq!(universal_defaults(387_840), Some((6, 640)));
        assert_eq!(universal_defaults(387_839), None);
        assert_eq!(universal_defaults(2_068_480), Some((8, 2560)));
    }

    #[test]
    fn short_stream_not_applicable() {
        assert!(!universal(&vec![0u8; 10_000], None, None).p_value.is_applicable());
    }

    #[test]
    fn statistic_matches_direct_definition() {
        let e: Vec<u8> = (0..400_000u64).map(|i| ((i.wrapping_mul(0x9E3779B97F4A7C15) >> 40) & 1) as u8).collect();
        let (l, q) = (6, 640);
        let blocks: Vec<usize> = e.chunks_exact(l).map(|c| c.iter().fold(0, |a, &b| (a << 1) | b as usize)).collect();
        let mut sum = 0.0;
        for i in q..blocks.len() {
            let prev = (0..i).rev().find(|&j| blocks[j] == blocks[i]).map_or(0, |j| j + 1);
            sum += ((i + 1 - prev) as f64).log2();
        }
        let phi = sum / (blocks.len() - q) as f64;
        assert!((universal_raw(&e, l, q).statistic - phi).abs() < 1e-12);
    }
}
