//! Serial and approximate entropy tests; both count overlapping patterns
//! with the sequence wrapped around at the end.

use super::Outcome;
use crate::special::igamc;

fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}

/// Frequencies of every `m`-bit pattern among the `n` circular windows.
pub(super) fn circular_counts(eps: &[u8], m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 1 << m];
    if m == 0 {
        counts[0] = eps.len() as u64;
        return counts;
    }
    let n = eps.len();
    let mask = (1usize << m) - 1;
    let mut w = 0usize;
    for &b in &eps[..m - 1] {
        w = (w << 1) | b as usize;
    }
    for i in 0..n {
        w = ((w << 1) | eps[(i + m - 1) % n] as usize) & mask;
        counts[w] += 1;
    }
    counts
}

/// `psi^2_m` computed in exact integer arithmetic before the final division.
fn psi_sq(eps: &[u8], m: isize) -> f64 {
    if m <= 0 {
        return 0.0;
    }
    let n = eps.len() as i128;
    let sum_sq: i128 = circular_counts(eps, m as usize).iter().map(|&c| (c as i128) * (c as i128)).sum();
    ((sum_sq << m) - n * n) as f64 / n as f64
}

pub(super) fn serial(eps: &[u8], m: usize) -> [Outcome; 2] {
    let n = eps.len();
    if n < 100 || m + 2 >= floor_log2(n) {
        return [Outcome::na(), Outcome::na()];
    }
    serial_raw(eps, m)
}

pub(super) fn serial_raw(eps: &[u8], m: usize) -> [Outcome; 2] {
    let m = m as isize;
    let (p0, p1, p2) = (psi_sq(eps, m), psi_sq(eps, m - 1), psi_sq(eps, m - 2));
    let del1 = p0 - p1;
    let del2 = p0 - 2.0 * p1 + p2;
    [
        Outcome::new(igamc(2f64.powi(m as i32 - 2), del1 / 2.0), del1),
        Outcome::new(igamc(2f64.powi(m as i32 - 3), del2 / 2.0), del2),
    ]
}

fn phi(eps: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = eps.len() as f64;
    // Sorting makes the sum independent of pattern labels, so a stream and
    // its complement give bit-identical results.
    let mut counts = circular_counts(eps, m);
    counts.sort_unstable();
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum()
}

pub(super) fn approximate_entropy(eps: &[u8], m: usize) -> Outcome {
    let n = eps.len();
    if n < 100 || m + 5 >= floor_log2(n) {
        return Outcome::na();
    }
    approximate_entropy_raw(eps, m)
}

pub(super) fn approximate_entropy_raw(eps: &[u8], m: usize) -> Outcome {
    let n = eps.len() as f64;
    let ap_en = phi(eps, m) - phi(eps, m + 1);
    let chi2 = 2.0 * n * (std::f64::consts::LN_2 - ap_en);
    Outcome::new(igamc(2f64.powi(m as i32 - 1), chi2 / 2.0), chi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> Vec<u8> {
        s.bytes().map(|c| c - b'0').collect()
    }

    #[test]
    fn serial_small_example() {
        let [a, b] = serial_raw(&bits("0011011101"), 3);
        assert!((a.p_value.value().unwrap() - 0.808792).abs() < 1e-6, "{a:?}");
        assert!((b.p_value.value().unwrap() - 0.670320).abs() < 1e-6, "{b:?}");
    }

    #[test]
    fn approximate_entropy_small_example() {
        let o = approximate_entropy_raw(&bits("0100110101"), 3);
        assert!((o.p_value.value().unwrap() - 0.261961).abs() < 1e-6, "{o:?}");
    }

    #[test]
    fn circular_counts_naive() {
        let e = bits("1101001110010111");
        for m in 1..6 {
            let c = circular_counts(&e, m);
            let mut naive = vec![0u64; 1 << m];
            for i in 0..e.len() {
                let v = (0..m).fold(0, |a, k| (a << 1) | e[(i + k) % e.len()] as usize);
                naive[v] += 1;
            }
            assert_eq!(c, naive);
        }
    }

    #[test]
    fn applicability_by_length() {
        let e = vec![0u8; 10_000];
        assert!(!serial(&e, 16)[0].p_value.is_applicable());
        assert!(serial(&e, 10)[0].p_value.is_applicable());
        assert!(!approximate_entropy(&e, 10).p_value.is_applicable());
        assert!(approximate_entropy(&e, 7).p_value.is_applicable());
    }
}
