//! Binary matrix rank test over 32 x 32 matrices.

use super::Outcome;

const Q: usize = 32;
const MIN_MATRICES: usize = 38;

/// Rank of a binary matrix given as row bitmasks, by Gaussian elimination
/// over GF(2).
pub(super) fn gf2_rank(rows: &mut [u32]) -> usize {
    let mut rank = 0;
    for col in (0..32).rev() {
        let bit = 1u32 << col;
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank];
        for r in 0..rows.len() {
            if r != rank && rows[r] & bit != 0 {
                rows[r] ^= p;
            }
        }
        rank += 1;
    }
    rank
}

/// Probability that a random `rows x cols` binary matrix has rank `r`.
pub(super) fn rank_probability(r: usize, rows: usize, cols: usize) -> f64 {
    let exp = (r * (rows + cols - r)) as f64 - (rows * cols) as f64;
    let mut prod = 1.0;
    for i in 0..r {
        let i = i as f64;
        prod *= (1.0 - 2f64.powf(i - rows as f64)) * (1.0 - 2f64.powf(i - cols as f64)) / (1.0 - 2f64.powf(i - r as f64));
    }
    2f64.powf(exp) * prod
}

pub(super) fn rank(eps: &[u8]) -> Outcome {
    let matrices = eps.len() / (Q * Q);
    if matrices < MIN_MATRICES {
        return Outcome::na();
    }
    let mut full = 0usize;
    let mut minus1 = 0usize;
    let mut rows = [0u32; Q];
    for block in eps.chunks_exact(Q * Q).take(matrices) {
        for (row, chunk) in rows.iter_mut().zip(block.chunks_exact(Q)) {
            *row = chunk.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
        }
        match gf2_rank(&mut rows) {
            32 => full += 1,
            31 => minus1 += 1,
            _ => {}
        }
    }
    let rest = matrices - full - minus1;
    let n = matrices as f64;
    let p32 = rank_probability(32, Q, Q);
    let p31 = rank_probability(31, Q, Q);
    let p30 = 1.0 - p32 - p31;
    let chi2 = (full as f64 - p32 * n).powi(2) / (p32 * n)
        + (minus1 as f64 - p31 * n).powi(2) / (p31 * n)
        + (rest as f64 - p30 * n).powi(2) / (p30 * n);
    Outcome::new((-chi2 / 2.0).exp(), chi2)
}
