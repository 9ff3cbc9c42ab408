//! Linear complexity test and the Berlekamp-Massey routine behind it.

use super::Outcome;
use crate::special::igamc;

const PI: [f64; 7] = [0.010417, 0.03125, 0.125, 0.5, 0.25, 0.0625, 0.020833];
const MIN_BLOCKS: usize = 200;

/// Shift a little-endian bitset left by `k` bits into `out` (XOR-ing).
fn xor_shifted(out: &mut [u64], src: &[u64], k: usize) {
    let (words, bits) = (k / 64, k % 64);
    for i in (words..out.len()).rev() {
        let j = i - words;
        let mut v = src[j] << bits;
        if bits != 0 && j > 0 {
            v |= src[j - 1] >> (64 - bits);
        }
        out[i] ^= v;
    }
}

/// Length of the shortest LFSR generating `s` over GF(2).
///
/// Connection polynomials are kept as bitsets; the discrepancy at step `n`
/// is the parity of `C & W`, where bit `i` of `W` holds `s[n - i]`.
pub fn berlekamp_massey(s: &[u8]) -> usize {
    let words = s.len() / 64 + 2;
    let mut c = vec![0u64; words];
    let mut b = vec![0u64; words];
    let mut w = vec![0u64; words];
    c[0] = 1;
    b[0] = 1;
    let mut l = 0usize;
    let mut m: isize = -1;
    for (n, &bit) in s.iter().enumerate() {
        // W <- (W << 1) | s[n]
        for i in (1..words).rev() {
            w[i] = (w[i] << 1) | (w[i - 1] >> 63);
        }
        w[0] = (w[0] << 1) | bit as u64;
        let parity = c.iter().zip(&w).map(|(x, y)| (x & y).count_ones()).sum::<u32>() & 1;
        if parity == 1 {
            let t = c.clone();
            xor_shifted(&mut c, &b, (n as isize - m) as usize);
            if 2 * l <= n {
                l = n + 1 - l;
                m = n as isize;
                b = t;
            }
        }
    }
    l
}

pub(super) fn linear_complexity(eps: &[u8], m: usize) -> Outcome {
    if eps.len() / m < MIN_BLOCKS {
        return Outcome::na();
    }
    linear_complexity_raw(eps, m)
}

pub(super) fn linear_complexity_raw(eps: &[u8], m: usize) -> Outcome {
    let blocks = eps.len() / m;
    let mf = m as f64;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mu = mf / 2.0 + (9.0 - sign) / 36.0 - (mf / 3.0 + 2.0 / 9.0) / 2f64.powi(m as i32);
    let mut nu = [0usize; 7];
    for block in eps.chunks_exact(m) {
        let t = sign * (berlekamp_massey(block) as f64 - mu) + 2.0 / 9.0;
        let idx = if t <= -2.5 {
            0
        } else if t <= -1.5 {
            1
        } else if t <= -0.5 {
            2
        } else if t <= 0.5 {
            3
        } else if t <= 1.5 {
            4
        } else if t <= 2.5 {
            5
        } else {
            6
        };
        nu[idx] += 1;
    }
    let n = blocks as f64;
    let chi2: f64 = nu.iter().zip(PI).map(|(&v, p)| (v as f64 - n * p).powi(2) / (n * p)).sum();
    Outcome::new(igamc(3.0, chi2 / 2.0), chi2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_bm(s: &[u8]) -> usize {
        let n = s.len();
        let (mut c, mut b) = (vec![0u8; n + 1], vec![0u8; n + 1]);
        c[0] = 1;
        b[0] = 1;
        let (mut l, mut m) = (0usize, -1isize);
        for i in 0..n {
            let mut d = s[i];
            for j in 1..=l {
                d ^= c[j] & s[i - j];
            }
            if d == 1 {
                let t = c.clone();
                let shift = (i as isize - m) as usize;
                for j in 0..=n - shift {
                    c[j + shift] ^= b[j];
                }
                if 2 * l <= i {
                    l = i + 1 - l;
                    m = i as isize;
                    b = t;
                }
            }
        }
        l
    }

    fn lfsr(taps: &[usize], seed: u64, len: usize) -> Vec<u8> {
        let d = *taps.iter().max().unwrap();
        let mut s: Vec<u8> = (0..d).map(|i| ((seed >> i) & 1) as u8).collect();
        while s.len() < len {
            let n = s.len();
            s.push(taps.iter().fold(0, |acc, &t| acc ^ s[n - t]));
        }
        s
    }

    #[test]
    fn reference_example() {
        let s: Vec<u8> = "1101011110001".bytes().map(|c| c - b'0').collect();
        assert_eq!(berlekamp_massey(&s), 4);
    }

    #[test]
    fn primitive_lfsr_recovered() {
        // x^31 + x^28 + 1 is primitive; any nonzero seed has complexity 31.
        let s = lfsr(&[31, 28], 0x5A5A_1234, 500);
        assert_eq!(berlekamp_massey(&s), 31);
        assert_eq!(berlekamp_massey(&s[..62]), 31);
    }

    proptest! {
        #[test]
        fn primitive_lfsr_any_window(
            which in 0usize..4,
            seed in 1u64..u64::MAX,
            start in 0usize..200,
            extra in 0usize..100,
        ) {
            let (degree, tap) = [(7, 6), (15, 14), (23, 18), (31, 28)][which];
            let seed = seed & ((1u64 << degree) - 1);
            prop_assume!(seed != 0);
            let s = lfsr(&[degree, tap], seed, start + 2 * degree + extra);
            prop_assert_eq!(berlekamp_massey(&s[start..]), degree);
        }

        #[test]
        fn bitset_matches_naive(s in proptest::collection::vec(0u8..2, 0..300)) {
            prop_assert_eq!(berlekamp_massey(&s), naive_bm(&s));
        }

        #[test]
        fn lfsr_window_complexity(degree in 2usize..40, tap in 1usize..40, seed in 1u64..u64::MAX, extra in 0usize..100) {
            let tap = tap % degree;
            let taps: Vec<usize> = if tap == 0 { vec![degree] } else { vec![degree, tap] };
            let s = lfsr(&taps, seed, 2 * degree + extra + 1);
            // The sequence satisfies a degree-`degree` recurrence, so its
            // complexity never exceeds it, and it equals the naive answer.
            let l = berlekamp_massey(&s);
            prop_assert!(l <= degree);
            prop_assert_eq!(l, naive_bm(&s));
        }
    }

    #[test]
    fn mean_formula() {
        let m = 500.0f64;
        let mu = m / 2.0 + (9.0 - 1.0) / 36.0 - (m / 3.0 + 2.0 / 9.0) / 2f64.powi(500);
        assert!((mu - 250.222222).abs() < 1e-6);
    }
}
