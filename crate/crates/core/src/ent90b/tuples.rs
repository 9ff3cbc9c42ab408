//! t-tuple and longest-repeated-substring estimators. Both need, for every
//! tuple length `W`, the count of the most common `W`-tuple and the number
//! of colliding pairs of `W`-tuples; these come from one pass over the
//! LCP intervals of the suffix array.

use suffix::SuffixTable;

use super::{Entropy, Z_99};

const CUTOFF: usize = 35;

/// Suffix array of a 0/1 sequence.
pub fn suffix_array(s: &[u8]) -> Vec<u32> {
    let text: String = s.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
    SuffixTable::new(text).table().to_vec()
}

/// Kasai's algorithm: `lcp[i]` is the longest common prefix of the suffixes
/// at `sa[i - 1]` and `sa[i]`; `lcp[0] = 0`.
pub fn lcp_array(s: &[u8], sa: &[u32]) -> Vec<u32> {
    let n = s.len();
    let mut rank = vec![0u32; n];
    for (i, &p) in sa.iter().enumerate() {
        rank[p as usize] = i as u32;
    }
    let mut lcp = vec![0u32; n];
    let mut h = 0usize;
    for p in 0..n {
        let r = rank[p] as usize;
        if r == 0 {
            h = 0;
            continue;
        }
        let q = sa[r - 1] as usize;
        while p + h < n && q + h < n && s[p + h] == s[q + h] {
            h += 1;
        }
        lcp[r] = h as u32;
        h = h.saturating_sub(1);
    }
    lcp
}

/// Per-length tuple statistics, indexed by `W` (entry 0 unused).
pub(super) struct TupleStats {
    /// Occurrences of the most common `W`-tuple.
    pub max_count: Vec<u64>,
    /// `sum_i C(c_i, 2)` over the counts `c_i` of distinct `W`-tuples.
    pub pairs: Vec<u64>,
}

pub(super) fn tuple_stats(s: &[u8]) -> TupleStats {
    let n = s.len();
    let sa = suffix_array(s);
    let lcp = lcp_array(s, &sa);
    let max_lcp = lcp.iter().copied().max().unwrap_or(0) as usize;
    let mut best = vec![0u64; max_lcp + 2];
    let mut diff = vec![0i128; max_lcp + 2];
    // Stack of (lcp value, left boundary) for open intervals.
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    for i in 1..=n {
        let cur = if i < n { lcp[i] as usize } else { 0 };
        let mut left = i - 1;
        while cur < stack.last().expect("root stays on the stack").0 {
            let (l, lb) = stack.pop().expect("non-empty");
            left = lb;
            let size = (i - lb) as u64;
            let parent = cur.max(stack.last().map_or(0, |t| t.0));
            best[l] = best[l].max(size);
            let c2 = (size * (size - 1) / 2) as i128;
            diff[parent + 1] += c2;
            diff[l + 1] -= c2;
        }
        if cur > stack.last().expect("root").0 {
            stack.push((cur, left));
        }
    }
    let mut max_count = vec![0u64; max_lcp + 1];
    let mut running = 0u64;
    for w in (1..=max_lcp).rev() {
        running = running.max(best[w]);
        max_count[w] = running;
    }
    let mut pairs = vec![0u64; max_lcp + 1];
    let mut acc = 0i128;
    for w in 1..=max_lcp {
        acc += diff[w];
        pairs[w] = acc as u64;
    }
    TupleStats { max_count, pairs }
}

fn bounded(p_max: f64, l: usize) -> Entropy {
    let pu = (p_max + Z_99 * (p_max * (1.0 - p_max) / (l as f64 - 1.0)).sqrt()).min(1.0);
    Entropy::from_probability(pu, 1.0)
}

/// Largest `t` whose most common `t`-tuple occurs at least 35 times.
fn cutoff_length(stats: &TupleStats) -> usize {
    (1..stats.max_count.len()).take_while(|&w| stats.max_count[w] >= CUTOFF as u64).last().unwrap_or(0)
}

pub(super) fn t_tuple(s: &[u8]) -> Entropy {
    let l = s.len();
    if l < CUTOFF {
        return Entropy::NotApplicable;
    }
    let stats = tuple_stats(s);
    // A single symbol is always a repeated 1-tuple here, so max_count has
    // at least two entries; with no repeat at all the most common
    // 1-tuple still counts max(ones, zeros) occurrences.
    let ones = s.iter().filter(|&&b| b == 1).count();
    let q1 = ones.max(l - ones);
    let t = cutoff_length(&stats);
    if q1 < CUTOFF || t == 0 {
        return Entropy::NotApplicable;
    }
    let p_max = (1..=t)
        .map(|i| {
            let p = stats.max_count[i] as f64 / (l - i + 1) as f64;
            p.powf(1.0 / i as f64)
        })
        .fold(0.0, f64::max);
    bounded(p_max, l)
}

pub(super) fn longest_repeated_substring(s: &[u8]) -> Entropy {
    let l = s.len();
    if l < 3 {
        return Entropy::NotApplicable;
    }
    let stats = tuple_stats(s);
    let u = cutoff_length(&stats) + 1;
    let v = stats.max_count.len() - 1;
    if v < u {
        return Entropy::NotApplicable;
    }
    let p_max = (u..=v)
        .map(|w| {
            let m = (l - w + 1) as f64;
            let p = stats.pairs[w] as f64 / (m * (m - 1.0) / 2.0);
            p.powf(1.0 / w as f64)
        })
        .fold(0.0, f64::max);
    bounded(p_max, l)
}
