//! Frequency, block frequency, cumulative sums, runs and longest-run tests.

use super::Outcome;
use crate::special::{erfc, igamc, normal_cdf};

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub(super) fn frequency(eps: &[u8]) -> Outcome {
    let n = eps.len();
    if n < 100 {
        return Outcome::na();
    }
    frequency_raw(eps)
}

pub(super) fn frequency_raw(eps: &[u8]) -> Outcome {
    let n = eps.len();
    let s = 2 * ones(eps) as i64 - n as i64;
    let s_obs = (s.abs() as f64) / (n as f64).sqrt();
    Outcome::new(erfc(s_obs / SQRT2), s_obs)
}

fn ones(eps: &[u8]) -> usize {
    eps.iter().map(|&b| b as usize).sum()
}

pub(super) fn block_frequency(eps: &[u8], m: usize) -> Outcome {
    if eps.len() < 100 || eps.len() / m == 0 {
        return Outcome::na();
    }
    block_frequency_raw(eps, m)
}

pub(super) fn block_frequency_raw(eps: &[u8], m: usize) -> Outcome {
    let blocks = eps.len() / m;
    let chi2: f64 = eps
        .chunks_exact(m)
        .map(|c| {
            let pi = ones(c) as f64 / m as f64;
            (pi - 0.5).powi(2)
        })
        .sum::<f64>()
        * 4.0
        * m as f64;
    Outcome::new(igamc(blocks as f64 / 2.0, chi2 / 2.0), chi2)
}

pub(super) fn cumulative_sums(eps: &[u8]) -> [Outcome; 2] {
    if eps.len() < 100 {
        return [Outcome::na(), Outcome::na()];
    }
    cumulative_sums_raw(eps)
}

pub(super) fn cumulative_sums_raw(eps: &[u8]) -> [Outcome; 2] {
    let n = eps.len();
    let mut s = 0i64;
    let (mut sup, mut inf) = (0i64, 0i64);
    for &b in eps {
        s += if b == 1 { 1 } else { -1 };
        sup = sup.max(s);
        inf = inf.min(s);
    }
    let z_fwd = sup.max(-inf);
    // The reverse walk's partial sums are S_n - S_{n-k}.
    let z_rev = (s - inf).max(sup - s).max(s.abs());
    [z_fwd, z_rev].map(|z| Outcome::new(cusum_p(n, z), z as f64))
}

fn cusum_p(n: usize, z: i64) -> f64 {
    let nf = n as f64;
    let z = z as f64;
    let sq = nf.sqrt();
    let mut sum1 = 0.0;
    let lo = ((-nf / z + 1.0) / 4.0) as i64;
    let hi = ((nf / z - 1.0) / 4.0) as i64;
    for k in lo..=hi {
        let k = k as f64;
        sum1 += normal_cdf((4.0 * k + 1.0) * z / sq) - normal_cdf((4.0 * k - 1.0) * z / sq);
    }
    let mut sum2 = 0.0;
    let lo = ((-nf / z - 3.0) / 4.0) as i64;
    for k in lo..=hi {
        let k = k as f64;
        sum2 += normal_cdf((4.0 * k + 3.0) * z / sq) - normal_cdf((4.0 * k + 1.0) * z / sq);
    }
    1.0 - sum1 + sum2
}

pub(super) fn runs(eps: &[u8]) -> Outcome {
    if eps.len() < 100 {
        return Outcome::na();
    }
    runs_raw(eps)
}

pub(super) fn runs_raw(eps: &[u8]) -> Outcome {
    let n = eps.len() as f64;
    let pi = ones(eps) as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        // Frequency prerequisite fails; the runs test is defined to give 0.
        return Outcome::new(0.0, f64::NAN);
    }
    let v = 1 + eps.windows(2).filter(|w| w[0] != w[1]).count();
    let v = v as f64;
    let num = (v - 2.0 * n * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi);
    Outcome::new(erfc(num / den), v)
}

struct LongestRunTable {
    m: usize,
    /// Longest-run value mapped to the first bin; runs at or above
    /// `v0 + k - 1` go to the last bin.
    v0: usize,
    pi: &'static [f64],
}

const LR_SMALL: LongestRunTable = LongestRunTable { m: 8, v0: 1, pi: &[0.2148, 0.3672, 0.2305, 0.1875] };
const LR_MEDIUM: LongestRunTable =
    LongestRunTable { m: 128, v0: 4, pi: &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124] };
const LR_LARGE: LongestRunTable =
    LongestRunTable { m: 10_000, v0: 10, pi: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727] };

pub(super) fn longest_run(eps: &[u8]) -> Outcome {
    let n = eps.len();
    let table = match n {
        0..128 => return Outcome::na(),
        128..6272 => &LR_SMALL,
        6272..750_000 => &LR_MEDIUM,
        _ => &LR_LARGE,
    };
    let bins = table.pi.len();
    let mut nu = vec![0usize; bins];
    let blocks = n / table.m;
    for block in eps.chunks_exact(table.m) {
        let (mut best, mut cur) = (0usize, 0usize);
        for &b in block {
            if b == 1 {
                cur += 1;
                best = best.max(cur);
            } else {
                cur = 0;
            }
        }
        let idx = best.saturating_sub(table.v0).min(bins - 1);
        nu[idx] += 1;
    }
    let nb = blocks as f64;
    let chi2: f64 = nu.iter().zip(table.pi).map(|(&v, &p)| (v as f64 - nb * p).powi(2) / (nb * p)).sum();
    Outcome::new(igamc((bins - 1) as f64 / 2.0, chi2 / 2.0), chi2)
}
