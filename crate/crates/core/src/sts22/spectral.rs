//! Discrete Fourier transform (spectral) test.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Outcome;
use crate::special::erfc;

pub(super) fn spectral(eps: &[u8]) -> Outcome {
    if eps.len() < 1000 {
        return Outcome::na();
    }
    spectral_raw(eps)
}

pub(super) fn spectral_raw(eps: &[u8]) -> Outcome {
    let n = eps.len();
    let mut buf: Vec<Complex<f64>> = eps.iter().map(|&b| Complex::new(if b == 1 { 1.0 } else { -1.0 }, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let threshold = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let below = buf[..n / 2].iter().filter(|c| c.norm() < threshold).count() as f64;
    let expected = 0.95 * nf / 2.0;
    let d = (below - expected) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    Outcome::new(erfc(d.abs() / std::f64::consts::SQRT_2), d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        // Reference values from an independent numpy FFT evaluation.
        let e: Vec<u8> = "1001010011".bytes().map(|c| c - b'0').collect();
        let o = spectral_raw(&e);
        assert!((o.p_value.value().unwrap() - 0.4681599098544281).abs() < 1e-9, "{o:?}");
        let pi100 = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";
        let e: Vec<u8> = pi100.bytes().map(|c| c - b'0').collect();
        let o = spectral_raw(&e);
        assert!((o.statistic - 0.4588314677411235).abs() < 1e-9, "{o:?}");
        assert!((o.p_value.value().unwrap() - 0.6463551955394902).abs() < 1e-9);
    }

    #[test]
    fn matches_naive_dft() {
        let e: Vec<u8> = (0..1500u64).map(|i| (i.wrapping_mul(0x9E3779B97F4A7C15) >> 63) as u8).collect();
        let n = e.len();
        let threshold = ((20.0f64).ln() * n as f64).sqrt();
        let mut below = 0;
        for j in 0..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &b) in e.iter().enumerate() {
                let x = if b == 1 { 1.0 } else { -1.0 };
                let ang = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            if (re * re + im * im).sqrt() < threshold {
                below += 1;
            }
        }
        let d = (below as f64 - 0.95 * n as f64 / 2.0) / (n as f64 * 0.95 * 0.05 / 4.0).sqrt();
        assert!((spectral(&e).statistic - d).abs() < 1e-9);
    }
}
