//! Full-battery comparison against an independent Python evaluation
//! (`tests/data/sts22_oracle.py`) on a fixed splitmix64 stream.

use qrng_core::bits::BitStream;
use qrng_core::par::Exec;
use qrng_core::sts22::{run_battery_with, PValue, Sts22Params, Sts22Report, TestFamily};
use serde_json::Value;

fn splitmix_bits(n: usize, seed: u64) -> BitStream {
    let mut x = seed;
    let bits = (0..n)
        .map(|_| {
            x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = x;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            ((z ^ (z >> 31)) >> 63) as u8
        })
        .collect();
    BitStream::from_bits(bits).unwrap()
}

fn report() -> Sts22Report {
    run_battery_with(&splitmix_bits(1_000_000, 42), &Sts22Params::default(), Exec::Sequential).unwrap()
}

#[test]
fn all_188_rows_match_reference() {
    let reference: Value = serde_json::from_str(include_str!("data/sts22_splitmix.json")).unwrap();
    let report = report();
    assert_eq!(report.results.len(), 188);
    for family in TestFamily::ALL {
        let want = reference[family.code()].as_array().unwrap_or_else(|| panic!("missing {family}"));
        let got = report.p_values(family);
        assert_eq!(want.len(), got.len(), "{family}");
        for (i, (w, g)) in want.iter().zip(&got).enumerate() {
            match (w.as_f64(), g) {
                (Some(w), PValue::Value(g)) => assert!((w - g).abs() < 1e-8, "{family}[{i}]: reference {w}, got {g}"),
                (None, PValue::NotApplicable) => {}
                _ => panic!("{family}[{i}]: reference {w}, got {g:?}"),
            }
        }
    }
}

#[test]
fn complement_invariance() {
    let s = splitmix_bits(1_000_000, 7);
    let c = s.complement();
    let params = Sts22Params::default();
    for family in [TestFamily::Frequency, TestFamily::Runs, TestFamily::Serial, TestFamily::ApproximateEntropy] {
        let a = qrng_core::sts22::run_test(family, &s, &params).unwrap();
        let b = qrng_core::sts22::run_test(family, &c, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.p_value.value().unwrap(), y.p_value.value().unwrap());
            assert!((x - y).abs() < 1e-12, "{family}: {x} vs {y}");
        }
    }
}

#[test]
fn parallel_and_sequential_agree() {
    let s = splitmix_bits(100_000, 3);
    let a = run_battery_with(&s, &Sts22Params::default(), Exec::Sequential).unwrap();
    let b = run_battery_with(&s, &Sts22Params::default(), Exec::Parallel).unwrap();
    assert_eq!(a, b);
}
