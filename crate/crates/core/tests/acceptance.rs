//! Acceptance criteria 1 to 10. Each test prints one `criterion N: PASS|FAIL`
//! line and then asserts it. Every random input comes from a fixed seed.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

use qrng_core::biasfit::{chi2_fit, expected_ones_fraction};
use qrng_core::bits::{self, BitStream, ExtractionPolicy};
use qrng_core::ent90b::{self, Estimator};
use qrng_core::families::{self, enumerate_c3_subsets, enumerate_paper_grid, CircuitSpec, FamilyId, GateChoice};
use qrng_core::harness::{self, execution_seed, Analysis, ExperimentConfig, GridSelection};
use qrng_core::par::Exec;
use qrng_core::qcore::{CalibrationSnapshot, Topology};
use qrng_core::simnoise::{self, NoiseProfile, ShotTable};
use qrng_core::sts22::{self, PValue, Sts22Params, TestFamily};

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} : {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn execute(spec: &CircuitSpec, shots: usize, noise: &NoiseProfile) -> (ShotTable, Duration) {
    let topo = Topology::spark();
    let circuit = families::transpile(&families::build(spec, &topo).unwrap(), &topo).unwrap();
    let ghz = (spec.family == FamilyId::C3).then(|| families::ghz_source(&spec.qubits, &topo).unwrap());
    let t = Instant::now();
    let seed = execution_seed(0, &spec.execution_key());
    let table = simnoise::run(&circuit, shots, noise, seed).unwrap().with_spec(spec.execution_key(), ghz);
    (table, t.elapsed())
}

fn stream_fraction(table: &ShotTable, spec: &CircuitSpec) -> f64 {
    let s = bits::extract(table, ExtractionPolicy::default_for(spec)).unwrap();
    bits::ones_fraction(&s).unwrap()
}

fn uniform_stream(seed: u64, n: usize) -> BitStream {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    BitStream::from_bools((0..n).map(|_| rng.random::<bool>()))
}

fn biased_stream(seed: u64, n: usize, p_one: f64) -> BitStream {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    BitStream::from_bools((0..n).map(|_| rng.random::<f64>() < p_one))
}

#[test]
fn criterion_01_ideal_c1_c2_balance() {
    let noise = NoiseProfile::ideal();
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    let mut streams = 0;
    for gate in GateChoice::ALL {
        for q in 0..5 {
            let spec = CircuitSpec::new(FamilyId::C1, gate, &[q]);
            let (table, dt) = execute(&spec, 1_000_000, &noise);
            worst = worst.max((stream_fraction(&table, &spec) - 0.5).abs());
            slowest = slowest.max(dt);
            streams += 1;
        }
        let all = [0, 1, 2, 3, 4];
        let (table, dt) = execute(&CircuitSpec::new(FamilyId::C2, gate, &all), 1_000_000, &noise);
        slowest = slowest.max(dt);
        for q in all {
            let spec = CircuitSpec::new(FamilyId::C2, gate, &all).with_select(q);
            worst = worst.max((stream_fraction(&table, &spec) - 0.5).abs());
            streams += 1;
        }
    }
    let pass = worst <= 0.0015 && slowest < Duration::from_secs(60);
    verdict(1, pass, &format!("{streams} streams, max |f - 0.5| = {worst:.5}, slowest execution {slowest:.2?}"));
}

#[test]
fn criterion_02_ghz_parity() {
    let noise = NoiseProfile::ideal();
    let shots = 100_000usize;
    let band = 3.0 * (0.25 / shots as f64).sqrt();
    let mut mixed = 0u64;
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for subset in enumerate_c3_subsets(&Topology::spark()).unwrap() {
        for gate in GateChoice::ALL {
            let (table, _) = execute(&CircuitSpec::new(FamilyId::C3, gate, &subset), shots, &noise);
            let h = table.histogram(0);
            let (zeros, ones) = (h[0], h[h.len() - 1]);
            mixed += shots as u64 - zeros - ones;
            worst = worst.max((zeros as f64 / shots as f64 - 0.5).abs());
            worst = worst.max((ones as f64 / shots as f64 - 0.5).abs());
            runs += 1;
        }
    }
    let pass = mixed == 0 && worst <= band;
    verdict(2, pass, &format!("{runs} runs, {mixed} mixed outcomes, max |share - 0.5| = {worst:.5} (band {band:.5})"));
}

#[test]
fn criterion_03_calibration_model_consistency() {
    let calib = CalibrationSnapshot::odra5_asymmetric();
    let noise = NoiseProfile::from_calibration(&calib);
    let mut worst: f64 = 0.0;
    let mut model_ok = true;
    for gate in GateChoice::ALL {
        for q in 0..5 {
            let spec = CircuitSpec::new(FamilyId::C1, gate, &[q]);
            model_ok &= (expected_ones_fraction(&calib, &spec).unwrap() - 0.4909).abs() < 1e-12;
            let (table, _) = execute(&spec, 1_000_000, &noise);
            worst = worst.max((stream_fraction(&table, &spec) - 0.4909).abs());
        }
    }
    let pass = model_ok && worst <= 0.0015;
    verdict(3, pass, &format!("model 0.4909 = {model_ok}, max |f - 0.4909| over 15 C1 streams = {worst:.5}"));
}

#[test]
fn criterion_04_known_answers() {
    // Oracle values: scipy.special.erfc and the runs closed form, evaluated
    // in double precision outside this crate.
    let params = Sts22Params::default();
    let freq = BitStream::from_ascii("1011010101").unwrap();
    let runs = BitStream::from_ascii("1001101011").unwrap();
    let f = sts22::run_test_any_length(TestFamily::Frequency, &freq, &params).unwrap()[0].p_value.value().unwrap();
    let r = sts22::run_test_any_length(TestFamily::Runs, &runs, &params).unwrap()[0].p_value.value().unwrap();
    let df = (f - 0.5270892568655381).abs();
    let dr = (r - 0.1472322553636657).abs();
    verdict(4, df <= 1e-6 && dr <= 1e-6, &format!("Frequency {f:.6} (|d| {df:.1e}), Runs {r:.6} (|d| {dr:.1e})"));
}

/// Zero crossings of the +-1 random walk, counting the closing return.
fn excursion_cycles(s: &BitStream) -> usize {
    let mut walk = 0i64;
    let mut j = 0;
    for &b in s.bits() {
        walk += if b == 1 { 1 } else { -1 };
        if walk == 0 {
            j += 1;
        }
    }
    if walk != 0 {
        j += 1;
    }
    j
}

#[test]
fn criterion_05_battery_shape_and_time() {
    let stream = uniform_stream(500, 1_000_000);
    let t = Instant::now();
    let report = sts22::run_battery(&stream, &Sts22Params::default()).unwrap();
    let dt = t.elapsed();
    let excursion_rows = |r: &sts22::Sts22Report| {
        r.results
            .iter()
            .filter(|x| matches!(x.family, TestFamily::RandomExcursions | TestFamily::RandomExcursionsVariant))
            .map(|x| x.p_value)
            .collect::<Vec<PValue>>()
    };
    let j = excursion_cycles(&stream);
    let rows = excursion_rows(&report);
    let consistent = (j < 500) == rows.iter().all(|p| !p.is_applicable());

    let drifted = biased_stream(501, 1_000_000, 0.51);
    let jd = excursion_cycles(&drifted);
    let dr = excursion_rows(&sts22::run_battery(&drifted, &Sts22Params::default()).unwrap());
    let drift_na = jd < 500 && dr.len() == 26 && dr.iter().all(|p| !p.is_applicable());

    let pass = dt < Duration::from_secs(60) && report.results.len() == 188 && consistent && drift_na;
    verdict(
        5,
        pass,
        &format!(
            "{} rows in {dt:.2?}; uniform stream J = {j}, excursion rows applicable = {}; drifted stream J = {jd}, all 26 NA = {drift_na}",
            report.results.len(),
            !rows.iter().all(|p| !p.is_applicable())
        ),
    );
}

#[test]
fn criterion_06_false_positive_calibration() {
    let params = Sts22Params::default();
    let seeds: Vec<u64> = (1000..1055).collect();
    let reports = qrng_core::par::map_slice(Exec::Parallel, &seeds, |&s| {
        sts22::run_battery_with(&uniform_stream(s, 1_000_000), &params, Exec::Sequential).unwrap()
    });
    let subtests = reports[0].results.len();
    let mut prop_ok = 0;
    let mut unif_ok = 0;
    for i in 0..subtests {
        // Sequences where a subtest is inapplicable are left out of its
        // proportion, as for the random excursion families.
        let ps: Vec<PValue> = reports.iter().map(|r| r.results[i].p_value).filter(|p| p.is_applicable()).collect();
        if ps.is_empty() {
            continue;
        }
        if sts22::proportion_pass(&ps, 0.01, ps.len()).unwrap().pass {
            prop_ok += 1;
        }
        if sts22::uniformity(&ps).unwrap().pass {
            unif_ok += 1;
        }
    }
    let need = (0.95 * subtests as f64).ceil() as usize;
    let pass = subtests == 188 && prop_ok >= need && unif_ok >= need;
    verdict(6, pass, &format!("55 streams: proportion ok {prop_ok}/188, uniformity ok {unif_ok}/188 (need {need})"));
}

#[test]
fn criterion_07_bias_detection() {
    let params = Sts22Params::default();
    let freq = |s: &BitStream| sts22::run_test(TestFamily::Frequency, s, &params).unwrap()[0].p_value.value().unwrap();
    let strong = freq(&biased_stream(700, 1_000_000, 0.48));
    let passes = (0..20u64).filter(|&k| freq(&biased_stream(800 + k, 1_000_000, 0.499)) >= 0.01).count();
    let pass = strong < 1e-100 && (10..=20).contains(&passes);
    verdict(7, pass, &format!("p = 0.48 gives Frequency p = {strong:.3e}; p = 0.499 passes {passes}/20"));
}

#[test]
fn criterion_08_entropy_sanity() {
    let n = 1_000_000;
    let constant = ent90b::min_entropy(&BitStream::from_bits(vec![0; n]).unwrap()).unwrap();
    let uniform = ent90b::min_entropy(&uniform_stream(0, n)).unwrap();
    let biased = ent90b::min_entropy(&biased_stream(2, n, 0.6)).unwrap();
    let mcv = biased.get(Estimator::MostCommonValue).value().unwrap();
    let lowest = uniform
        .estimates
        .iter()
        .filter_map(|(e, h)| Some((e.code(), h.value()?)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let checks = [
        constant.min_entropy == 0.0,
        uniform.min_entropy >= 0.85,
        (mcv - 0.735).abs() <= 0.01,
        biased.min_entropy <= mcv,
    ];
    verdict(
        8,
        checks.iter().all(|&c| c),
        &format!(
            "constant {}; uniform {:.4} (lowest estimator {} {:.4}); p = 0.6 MCV {mcv:.4}, min {:.4}",
            constant.min_entropy, uniform.min_entropy, lowest.0, lowest.1, biased.min_entropy
        ),
    );
}

#[test]
fn criterion_09_chi2_self_consistency() {
    let calib = CalibrationSnapshot::odra5_asymmetric();
    let noise = NoiseProfile::from_calibration(&calib);
    let predicted = simnoise::predicted_distribution(&[0.5, 0.0, 0.0, 0.5], &noise, &[0, 2]).unwrap();
    let mut cdf = predicted.clone();
    for i in 1..cdf.len() {
        cdf[i] += cdf[i - 1];
    }
    let draws = 1_000_000u64;
    let trials: Vec<u64> = (0..200).collect();
    let rejections = qrng_core::par::map_slice(Exec::Parallel, &trials, |&t| {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + t);
        let mut h = vec![0u64; 4];
        for _ in 0..draws {
            let u: f64 = rng.random();
            h[cdf.iter().position(|&c| u < c).unwrap_or(3)] += 1;
        }
        chi2_fit(&h, &predicted, draws).unwrap().p_value < 0.01
    })
    .into_iter()
    .filter(|&r| r)
    .count();
    verdict(9, rejections <= 7, &format!("{rejections}/200 rejections at alpha 0.01"));
}

#[test]
fn criterion_10_grid_reproduction() {
    let topo = Topology::spark();
    let grid = enumerate_paper_grid(&topo).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(GridSelection::Keyword("paper-grid".into()), dir.path());
    cfg.shots = Some(100_000);
    let t = Instant::now();
    let manifest = harness::run_experiment(&cfg).unwrap();
    let eval = harness::evaluate(&manifest, dir.path(), &[Analysis::Sts22, Analysis::Ent90b], Exec::Parallel).unwrap();
    let dt = t.elapsed();
    let cells: usize = eval.sts22_heatmap.as_ref().map_or(0, |h| h.rows.len() * h.columns.len());
    let entropy_rows = eval.ent90b_heatmap.as_ref().map_or(0, |h| h.rows.len());
    let pass = grid.len() == 105
        && manifest.entries.len() == 105
        && manifest.failures() == 0
        && cells == 105 * 188
        && entropy_rows == 105
        && dt < Duration::from_secs(30 * 60);
    verdict(
        10,
        pass,
        &format!("{} specs, {} streams, {cells} sts22 cells, {entropy_rows} entropy rows, {dt:.1?}", grid.len(), manifest.entries.len()),
    );
}
