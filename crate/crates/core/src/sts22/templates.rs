//! Non-overlapping and overlapping template matching tests.

use std::sync::OnceLock;

use super::Outcome;
use crate::special::igamc;

pub(super) const MAX_M: usize = 16;
const NOT_BLOCKS: usize = 8;
const OT_BLOCK: usize = 1032;
const OT_PI: [f64; 6] = [0.364091, 0.185659, 0.139381, 0.100571, 0.070432, 0.139865];

/// All aperiodic templates of length `m` (no proper prefix equals the suffix
/// of the same length), in ascending order. Bit `m-1` of each value is the
/// template's first bit.
pub fn aperiodic_templates(m: usize) -> &'static [u32] {
    static CACHE: [OnceLock<Vec<u32>>; MAX_M + 1] = [const { OnceLock::new() }; MAX_M + 1];
    assert!((1..=MAX_M).contains(&m), "template length {m} out of range");
    CACHE[m].get_or_init(|| (0..1u32 << m).filter(|&t| is_aperiodic(t, m)).collect())
}

fn is_aperiodic(t: u32, m: usize) -> bool {
    (1..m).all(|k| {
        let prefix = t >> (m - k);
        let suffix = t & ((1 << k) - 1);
        prefix != suffix
    })
}

/// Sliding `m`-bit window values; entry `i` covers `eps[i..i + m]` with the
/// first bit most significant.
fn windows(eps: &[u8], m: usize) -> impl Iterator<Item = u32> + '_ {
    let mask = (1u32 << m) - 1;
    let mut w = 0u32;
    eps.iter().enumerate().filter_map(move |(i, &b)| {
        w = ((w << 1) | b as u32) & mask;
        (i + 1 >= m).then_some(w)
    })
}

pub(super) fn non_overlapping(eps: &[u8], m: usize) -> Vec<Outcome> {
    let templates = aperiodic_templates(m);
    let block = eps.len() / NOT_BLOCKS;
    if eps.len() < 100 || block < m {
        return vec![Outcome::na(); templates.len()];
    }
    non_overlapping_raw(eps, templates, m, NOT_BLOCKS)
}

/// An aperiodic template cannot overlap itself, so the skip-ahead scan
/// counts exactly the occurrences of the template in each block. Counting
/// every window value once per block therefore serves all templates.
pub(super) fn non_overlapping_raw(eps: &[u8], templates: &[u32], m: usize, blocks: usize) -> Vec<Outcome> {
    let block = eps.len() / blocks;
    let mut counts = vec![vec![0u32; 1 << m]; blocks];
    for (j, chunk) in eps.chunks_exact(block).take(blocks).enumerate() {
        for w in windows(chunk, m) {
            counts[j][w as usize] += 1;
        }
    }
    let mf = block as f64;
    let two_m = 2f64.powi(m as i32);
    let mu = (mf - m as f64 + 1.0) / two_m;
    let var = mf * (1.0 / two_m - (2.0 * m as f64 - 1.0) / (two_m * two_m));
    templates
        .iter()
        .map(|&t| {
            let chi2: f64 = counts.iter().map(|c| (c[t as usize] as f64 - mu).powi(2) / var).sum();
            Outcome::new(igamc(blocks as f64 / 2.0, chi2 / 2.0), chi2)
        })
        .collect()
}

pub(super) fn overlapping(eps: &[u8], m: usize) -> Outcome {
    if eps.len() < 1_000_000 {
        return Outcome::na();
    }
    overlapping_raw(eps, m)
}

pub(super) fn overlapping_raw(eps: &[u8], m: usize) -> Outcome {
    let blocks = eps.len() / OT_BLOCK;
    let mut nu = [0usize; 6];
    for chunk in eps.chunks_exact(OT_BLOCK).take(blocks) {
        let hits = windows(chunk, m).filter(|&w| w == (1 << m) - 1).count();
        nu[hits.min(5)] += 1;
    }
    let n = blocks as f64;
    let chi2: f64 = nu.iter().zip(OT_PI).map(|(&v, p)| (v as f64 - n * p).powi(2) / (n * p)).sum();
    Outcome::new(igamc(2.5, chi2 / 2.0), chi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|c| c - b'0').collect()
    }

    #[test]
    fn template_counts() {
        assert_eq!(aperiodic_templates(2), &[0b01, 0b10]);
        assert_eq!(aperiodic_templates(3).len(), 4);
        assert_eq!(aperiodic_templates(9).len(), 148);
        assert_eq!(aperiodic_templates(9)[0], 0b000000001);
        assert_eq!(*aperiodic_templates(9).last().unwrap(), 0b111111110);
    }

    fn skip_scan(block: &[u8], t: &[u8]) -> usize {
        let (mut i, mut w) = (0, 0);
        while i + t.len() <= block.len() {
            if &block[i..i + t.len()] == t {
                w += 1;
                i += t.len();
            } else {
                i += 1;
            }
        }
        w
    }

    #[test]
    fn histogram_matches_skip_scan() {
        let e: Vec<u8> = (0..4096u64).map(|i| ((i.wrapping_mul(0x2545F4914F6CDD1D) >> 61) & 1) as u8).collect();
        let m = 5;
        let blocks = 4;
        let block = e.len() / blocks;
        for &t in aperiodic_templates(m) {
            let tb: Vec<u8> = (0..m).rev().map(|k| ((t >> k) & 1) as u8).collect();
            let mut counts = [0usize; 4];
            for (j, c) in e.chunks_exact(block).enumerate() {
                counts[j] = skip_scan(c, &tb);
                let by_window = windows(c, m).filter(|&w| w == t).count();
                assert_eq!(counts[j], by_window, "template {t:05b}");
            }
        }
    }

    #[test]
    fn non_overlapping_small_example() {
        let o = non_overlapping_raw(&bits("10100100101110010110"), &[0b001], 3, 2);
        assert!((o[0].p_value.value().unwrap() - 0.344154).abs() < 1e-6, "{o:?}");
    }

    #[test]
    fn overlapping_needs_a_million_bits() {
        assert!(!overlapping(&vec![0u8; 10_000], 9).p_value.is_applicable());
    }
}
