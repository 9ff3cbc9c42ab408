//! Most common value, collision, Markov and compression estimators.

use super::{Entropy, Z_99};

pub(super) fn most_common_value(s: &[u8]) -> Entropy {
    let l = s.len();
    if l < 2 {
        return Entropy::NotApplicable;
    }
    let ones = s.iter().filter(|&&b| b == 1).count();
    let p = ones.max(l - ones) as f64 / l as f64;
    let pu = (p + Z_99 * (p * (1.0 - p) / (l as f64 - 1.0)).sqrt()).min(1.0);
    Entropy::from_probability(pu, 1.0)
}

/// Mean time to the first repeated value for a binary source with
/// `Pr(most likely) = p`.
pub(super) fn collision_mean(p: f64) -> f64 {
    2.0 + 2.0 * p * (1.0 - p)
}

pub(super) fn collision(s: &[u8]) -> Entropy {
    let mut times = Vec::new();
    let mut i = 0;
    while i + 1 < s.len() {
        if s[i] == s[i + 1] {
            times.push(2.0);
            i += 2;
        } else if i + 2 < s.len() {
            times.push(3.0);
            i += 3;
        } else {
            break;
        }
    }
    let v = times.len();
    if v < 2 {
        return Entropy::NotApplicable;
    }
    let vf = v as f64;
    let mean = times.iter().sum::<f64>() / vf;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (vf - 1.0);
    let lower = mean - Z_99 * var.sqrt() / vf.sqrt();
    // Invert the mean collision time on p in [1/2, 1].
    let p = if lower >= collision_mean(0.5) {
        0.5
    } else if lower <= 2.0 {
        1.0
    } else {
        0.5 * (1.0 + (1.0 - 2.0 * (lower - 2.0)).sqrt())
    };
    Entropy::from_probability(p, 1.0)
}

pub(super) fn markov(s: &[u8]) -> Entropy {
    let l = s.len();
    if l < 2 {
        return Entropy::NotApplicable;
    }
    let ones = s.iter().filter(|&&b| b == 1).count();
    let mut t = [[0usize; 2]; 2];
    for w in s.windows(2) {
        t[w[0] as usize][w[1] as usize] += 1;
    }
    let ln = |num: usize, den: usize| if num == 0 { f64::NEG_INFINITY } else { (num as f64 / den as f64).ln() };
    let p0 = ln(l - ones, l);
    let p1 = ln(ones, l);
    let row0 = t[0][0] + t[0][1];
    let row1 = t[1][0] + t[1][1];
    let p00 = ln(t[0][0], row0);
    let p01 = ln(t[0][1], row0);
    let p10 = ln(t[1][0], row1);
    let p11 = ln(t[1][1], row1);
    // Most likely 128-bit sequences under the fitted chain, in log space.
    let candidates = [
        p0 + 127.0 * p00,
        p0 + 64.0 * p01 + 63.0 * p10,
        p0 + p01 + 126.0 * p11,
        p1 + p10 + 126.0 * p00,
        p1 + 64.0 * p10 + 63.0 * p01,
        p1 + 127.0 * p11,
    ];
    let best = candidates.iter().copied().filter(|c| !c.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    let h = (-best / std::f64::consts::LN_2 / 128.0).min(1.0);
    Entropy::Value(h.clamp(0.0, 1.0))
}

const CMP_B: usize = 6;
const CMP_D: usize = 1000;
const CMP_C: f64 = 0.5907;

pub(super) fn compression(s: &[u8]) -> Entropy {
    let blocks: Vec<usize> =
        s.chunks_exact(CMP_B).map(|c| c.iter().fold(0usize, |a, &b| (a << 1) | b as usize)).collect();
    if blocks.len() < CMP_D + 2 {
        return Entropy::NotApplicable;
    }
    let nu = blocks.len() - CMP_D;
    let mut last = vec![0usize; 1 << CMP_B];
    for (i, &b) in blocks[..CMP_D].iter().enumerate() {
        last[b] = i + 1;
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for (i, &b) in blocks.iter().enumerate().skip(CMP_D) {
        let idx = i + 1;
        let d = if last[b] == 0 { idx } else { idx - last[b] };
        let lg = (d as f64).log2();
        sum += lg;
        sum_sq += lg * lg;
        last[b] = idx;
    }
    let nuf = nu as f64;
    let mean = sum / nuf;
    let sigma = CMP_C * (sum_sq / (nuf - 1.0) - mean * mean).max(0.0).sqrt();
    let lower = mean - Z_99 * sigma / nuf.sqrt();
    let k = (1usize << CMP_B) as f64;
    let model = CompressionModel::new(CMP_D, blocks.len());
    let expected = |p: f64| model.g(p) + (k - 1.0) * model.g((1.0 - p) / (k - 1.0));
    let p_min = 1.0 / k;
    let p = if lower >= expected(p_min) {
        p_min
    } else {
        // `expected` decreases in p on [1/k, 1].
        let (mut lo, mut hi) = (p_min, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if expected(mid) > lower {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    Entropy::from_probability(p, CMP_B as f64)
}

/// Expected value of `log2` of the distance to the previous occurrence,
/// averaged over test positions `d + 1 ..= total`.
pub(super) struct CompressionModel {
    d: usize,
    total: usize,
    log2: Vec<f64>,
}

impl CompressionModel {
    pub(super) fn new(d: usize, total: usize) -> Self {
        CompressionModel { d, total, log2: (0..=total).map(|u| (u.max(1) as f64).log2()).collect() }
    }

    /// `G(z) = 1/nu * sum_t [ sum_{u<t} z^2 (1-z)^(u-1) log2 u + z (1-z)^(t-1) log2 t ]`,
    /// evaluated with a running prefix sum over `u`.
    pub(super) fn g(&self, z: f64) -> f64 {
        let w = 1.0 - z;
        let mut prefix = 0.0; // sum_{u<t} (1-z)^(u-1) log2 u
        let mut pow = 1.0; // (1-z)^(t-1)
        let mut total = 0.0;
        for t in 1..=self.total {
            if t > self.d {
                total += z * z * prefix + z * pow * self.log2[t];
            }
            prefix += pow * self.log2[t];
            pow *= w;
        }
        total / (self.total - self.d) as f64
    }
}
