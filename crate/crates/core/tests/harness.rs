use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use qrng_core::families::{self, CircuitSpec, FamilyId, GateChoice};
use qrng_core::harness::{
    evaluate, run_experiment, submit_remote, Analysis, BackendConfig, ExperimentConfig, GridSelection, HarnessError,
    RemoteError, RunManifest, MANIFEST_FILE,
};
use qrng_core::par::Exec;
use qrng_core::qcore::Topology;
use serde_json::{json, Value};

fn small_grid() -> Vec<CircuitSpec> {
    vec![
        CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]),
        CircuitSpec::new(FamilyId::C2, GateChoice::Rx, &[0, 1, 2, 3, 4]).with_select(1),
        CircuitSpec::new(FamilyId::C2, GateChoice::Rx, &[0, 1, 2, 3, 4]).with_select(3),
        CircuitSpec::new(FamilyId::C3, GateChoice::Ry, &[0, 2, 4]),
        CircuitSpec::new(FamilyId::C5, GateChoice::H, &[2]),
    ]
}

fn config(dir: &std::path::Path, grid: GridSelection, shots: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(grid, dir);
    c.shots = Some(shots);
    c.seed = 11;
    c
}

#[test]
fn run_writes_files_matching_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&config(dir.path(), GridSelection::Specs(small_grid()), 4000)).unwrap();
    assert_eq!(m.entries.len(), 5);
    assert_eq!(m.failures(), 0);
    let lengths: Vec<usize> = m.entries.iter().map(|e| e.length).collect();
    assert_eq!(lengths, vec![4000, 4000, 4000, 4000, 8000]);
    for e in &m.entries {
        let path = dir.path().join(e.file.as_ref().unwrap());
        assert_eq!(fs::metadata(&path).unwrap().len() as usize, e.length.div_ceil(8));
        let f = e.ones_fraction.unwrap();
        assert!((f - 0.5).abs() < 0.05, "{} {f}", e.label);
    }
    // Both C2 streams come from one execution.
    assert_eq!(m.entries[1].seed, m.entries[2].seed);
    assert_eq!(m.entries[3].histogram.as_ref().unwrap().len(), 8);
    let loaded = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, m);
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&config(a.path(), GridSelection::Specs(small_grid()), 3000)).unwrap();
    let mut cb = config(b.path(), GridSelection::Specs(small_grid()), 3000);
    cb.exec = Exec::Sequential;
    cb.workers = 1;
    let mb = run_experiment(&cb).unwrap();
    for (x, y) in ma.entries.iter().zip(&mb.entries) {
        let fx = fs::read(a.path().join(x.file.as_ref().unwrap())).unwrap();
        let fy = fs::read(b.path().join(y.file.as_ref().unwrap())).unwrap();
        assert_eq!(fx, fy, "{}", x.label);
    }
}

#[test]
fn paper_grid_produces_105_streams_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&config(dir.path(), GridSelection::Keyword("paper-grid".into()), 200)).unwrap();
    assert_eq!(m.entries.len(), 105);
    assert_eq!(m.failures(), 0);
    for (fam, n) in [(FamilyId::C1, 15), (FamilyId::C2, 15), (FamilyId::C3, 45), (FamilyId::C4, 15), (FamilyId::C5, 15)] {
        assert_eq!(m.entries.iter().filter(|e| e.spec.family == fam).count(), n);
    }
    let eval = evaluate(&m, dir.path(), &[Analysis::Biasfit], Exec::default()).unwrap();
    let t = eval.frequency_table.unwrap();
    assert_eq!(t.columns.len(), 12);
    assert_eq!(t.rows.len(), 6);
    let s = eval.subset_table.unwrap();
    assert_eq!(s.rows.len(), 15);
    assert!(s.rows.iter().all(|r| r.fit.is_some() && r.by_gate.iter().all(Option::is_some)));
    let out = dir.path().join("reports");
    let eval = evaluate(&m, dir.path(), &[Analysis::Biasfit], Exec::default()).unwrap();
    eval.write(&out).unwrap();
    assert!(fs::read_to_string(out.join("frequency_table.txt")).unwrap().contains("flatten"));
    assert!(out.join("subset_table.json").exists());
}

#[test]
fn evaluation_emits_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let specs = vec![
        CircuitSpec::new(FamilyId::C1, GateChoice::Ry, &[4]),
        CircuitSpec::new(FamilyId::C4, GateChoice::H, &[1]),
    ];
    let m = run_experiment(&config(dir.path(), GridSelection::Specs(specs), 20_000)).unwrap();
    let eval = evaluate(&m, dir.path(), &Analysis::ALL, Exec::default()).unwrap();
    let h = eval.sts22_heatmap.as_ref().unwrap();
    assert_eq!((h.rows.len(), h.columns.len()), (2, 188));
    let e = eval.ent90b_heatmap.as_ref().unwrap();
    assert_eq!((e.rows.len(), e.columns.len()), (2, 13));
    for s in &eval.streams {
        assert_eq!(s.ent90b.as_ref().unwrap().as_object().unwrap().len(), 13);
    }
    eval.write(&dir.path().join("r")).unwrap();
    let tsv = fs::read_to_string(dir.path().join("r/sts22_heatmap.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3);
}

#[test]
fn evaluation_rejects_truncated_files() {
    let dir = tempfile::tempdir().unwrap();
    let specs = vec![CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0])];
    let m = run_experiment(&config(dir.path(), GridSelection::Specs(specs), 1000)).unwrap();
    let path = dir.path().join(m.entries[0].file.as_ref().unwrap());
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    let err = evaluate(&m, dir.path(), &[Analysis::Sts22], Exec::default()).unwrap_err();
    assert!(matches!(err, HarnessError::CorruptFile { expected: 1000, .. }));
}

#[test]
fn invalid_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = vec![CircuitSpec::new(FamilyId::C3, GateChoice::H, &[0, 1])];
    assert!(matches!(run_experiment(&config(dir.path(), GridSelection::Specs(bad), 10)), Err(HarnessError::Config(_))));
}

/// Serves `n` requests, answering each with shots built by `reply` from the
/// parsed request document.
fn serve(n: usize, reply: fn(&Value) -> Value) -> (String, thread::JoinHandle<Vec<Value>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/run", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                if let Some((k, v)) = l.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let req: Value = serde_json::from_slice(&body).unwrap();
            let out = serde_json::to_string(&reply(&req)).unwrap();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                out.len(),
                out
            )
            .unwrap();
            seen.push(req);
        }
        seen
    });
    (url, handle)
}

fn native(spec: &CircuitSpec) -> qrng_core::qcore::Circuit {
    let t = Topology::spark();
    families::transpile(&families::build(spec, &t).unwrap(), &t).unwrap()
}

fn alternating(req: &Value) -> Value {
    let shots = req["shots"].as_u64().unwrap() as usize;
    let width: usize = req["ops"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|o| o["gate"] == "measure")
        .map(|o| o["qubits"].as_array().unwrap().len())
        .sum();
    json!({ "shots": (0..shots).map(|i| vec![(i % 2) as u8; width]).collect::<Vec<_>>() })
}

fn one_short(req: &Value) -> Value {
    let shots = req["shots"].as_u64().unwrap() as usize;
    json!({ "shots": vec![vec![0u8]; shots - 1] })
}

#[test]
fn remote_roundtrip_through_loopback() {
    let (url, h) = serve(1, alternating);
    let c = native(&CircuitSpec::new(FamilyId::C3, GateChoice::H, &[1, 2]));
    let t = submit_remote(&c, 6, &url, Duration::from_secs(5)).unwrap();
    let req = h.join().unwrap().remove(0);
    assert_eq!(req["qubit_order"], json!([1, 2]));
    assert!(req["ops"].as_array().unwrap().iter().all(|o| ["rx", "ry", "cz", "measure"].contains(&o["gate"].as_str().unwrap())));
    assert_eq!(t.shots(), 6);
    for i in 0..6 {
        assert_eq!(t.shot(i), &[(i % 2) as u8; 2]);
    }
}

#[test]
fn remote_shot_count_mismatch_is_malformed() {
    let (url, h) = serve(1, one_short);
    let c = native(&CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]));
    let err = submit_remote(&c, 4, &url, Duration::from_secs(5)).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, RemoteError::MalformedResponse(_)), "{err:?}");
}

#[test]
fn remote_rejects_non_native_before_sending() {
    let c = families::build(&CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]), &Topology::spark()).unwrap();
    let err = submit_remote(&c, 4, "http://127.0.0.1:1/", Duration::from_secs(1)).unwrap_err();
    assert_eq!(err, RemoteError::NotNative("H"));
}

#[test]
fn remote_backend_run_and_unreachable_endpoint() {
    let (url, h) = serve(2, alternating);
    let dir = tempfile::tempdir().unwrap();
    let specs = vec![
        CircuitSpec::new(FamilyId::C1, GateChoice::H, &[0]),
        CircuitSpec::new(FamilyId::C5, GateChoice::Rx, &[3]),
    ];
    let mut c = config(dir.path(), GridSelection::Specs(specs.clone()), 10);
    c.backend = BackendConfig::Remote { endpoint: url, timeout_s: 5, retries: 0 };
    c.exec = Exec::Sequential;
    let m = run_experiment(&c).unwrap();
    h.join().unwrap();
    assert_eq!(m.failures(), 0, "{:?}", m.entries);
    assert_eq!(m.entries[0].ones_fraction, Some(0.5));
    assert_eq!(m.entries[1].length, 20);

    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), GridSelection::Specs(specs), 10);
    c.backend = BackendConfig::Remote { endpoint: format!("http://127.0.0.1:{port}/"), timeout_s: 2, retries: 1 };
    let m = run_experiment(&c).unwrap();
    assert_eq!(m.failures(), 2);
    assert!(m.entries.iter().all(|e| e.file.is_none() && e.error.as_ref().unwrap().contains("transport")));
}
