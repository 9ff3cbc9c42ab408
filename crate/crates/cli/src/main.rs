use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrng_core::bits::{self, BitStream};
use qrng_core::ent90b;
use qrng_core::harness::{self, Analysis, ExperimentConfig, HarnessError, RunManifest, MANIFEST_FILE};
use qrng_core::par::Exec;
use qrng_core::sts22::{self, PValue, Sts22Params, Sts22Report};

const OK: u8 = 0;
const PARTIAL: u8 = 1;
const INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "qrngeval", version, about = "Generate QRNG bitstreams on a noisy simulator and test them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run circuits and write packed bit files plus a manifest.
    Gen(GenArgs),
    /// Run the SP 800-22 battery on bit files.
    Test22(Test22Args),
    /// Run the SP 800-90B non-IID estimators on bit files.
    Test90b(Test90bArgs),
    /// Evaluate every stream of a run and write reports.
    Analyze(AnalyzeArgs),
    /// Print the ones-fraction tables of a run.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML experiment file; its values take precedence over flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid keyword, e.g. `paper-grid`. Ignored when --family is given.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value = "H")]
    gate: String,
    /// Comma-separated qubit ids.
    #[arg(long, value_delimiter = ',')]
    qubits: Vec<usize>,
    /// Report a single qubit's stream of a multi-qubit C2 run.
    #[arg(long)]
    select: Option<usize>,
    /// Measurements per shot for C5.
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Calibration TOML file.
    #[arg(long)]
    calib: Option<PathBuf>,
    /// `local` or the URL of a remote executor.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct Test22Args {
    /// `.bin` files (with sidecar) or ASCII 0/1 files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Significance level for the multi-sequence summary.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Only test the first N bits of each file.
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct Test90bArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory holding manifest.json.
    run: PathBuf,
    /// Comma-separated subset of sts22, ent90b, biasfit.
    #[arg(long, value_delimiter = ',', default_value = "sts22,ent90b,biasfit")]
    what: Vec<Analysis>,
    /// Report directory; defaults to <run>/reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ReportArgs {
    run: PathBuf,
    #[arg(long)]
    json: bool,
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("qrngeval: {msg}");
    ExitCode::from(code)
}

fn harness_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Config(_) | HarnessError::Calibration(_) => INVALID,
        _ => PARTIAL,
    }
}

fn gen_table(a: &GenArgs) -> Result<toml::Table, String> {
    let mut t = toml::Table::new();
    if let Some(f) = &a.family {
        let mut spec = toml::Table::new();
        spec.insert("family".into(), f.to_ascii_uppercase().into());
        spec.insert("gate".into(), a.gate.clone().into());
        let qs: Vec<toml::Value> = a.qubits.iter().map(|&q| toml::Value::Integer(q as i64)).collect();
        spec.insert("qubits".into(), qs.into());
        if let Some(s) = a.select {
            spec.insert("select".into(), (s as i64).into());
        }
        if let Some(r) = a.repetitions {
            spec.insert("repetitions".into(), (r as i64).into());
        }
        t.insert("grid".into(), toml::Value::Array(vec![spec.into()]));
    } else if let Some(g) = &a.grid {
        t.insert("grid".into(), g.clone().into());
    }
    if let Some(s) = a.shots {
        t.insert("shots".into(), (s as i64).into());
    }
    if let Some(s) = a.seed {
        let s = i64::try_from(s).map_err(|_| format!("seed {s} exceeds {}", i64::MAX))?;
        t.insert("seed".into(), s.into());
    }
    if let Some(c) = &a.calib {
        t.insert("calibration".into(), c.to_string_lossy().into_owned().into());
    }
    if let Some(b) = &a.backend {
        let mut bt = toml::Table::new();
        if b == "local" {
            bt.insert("kind".into(), "local".into());
        } else {
            bt.insert("kind".into(), "remote".into());
            bt.insert("endpoint".into(), b.clone().into());
        }
        t.insert("backend".into(), bt.into());
    }
    if let Some(o) = &a.out {
        t.insert("out".into(), o.to_string_lossy().into_owned().into());
    }
    if let Some(w) = a.workers {
        t.insert("workers".into(), (w as i64).into());
    }
    if a.sequential {
        t.insert("exec".into(), "sequential".into());
    }
    Ok(t)
}

fn cmd_gen(a: GenArgs) -> ExitCode {
    let mut table = match gen_table(&a) {
        Ok(t) => t,
        Err(e) => return fail(INVALID, e),
    };
    if let Some(path) = &a.config {
        match ExperimentConfig::load_table(path) {
            Ok(file) => table.extend(file),
            Err(e) => return fail(INVALID, e),
        }
    }
    if !table.contains_key("out") {
        return fail(INVALID, "no output directory: pass --out or set `out` in the config");
    }
    let config = match ExperimentConfig::from_table(table) {
        Ok(c) => c,
        Err(e) => return fail(INVALID, e),
    };
    match harness::run_experiment(&config) {
        Ok(m) => {
            let bad = m.failures();
            println!("{} streams, {} failed, manifest {}", m.entries.len(), bad, config.out.join(MANIFEST_FILE).display());
            for e in m.entries.iter().filter(|e| e.error.is_some()) {
                eprintln!("{}: {}", e.label, e.error.as_deref().unwrap_or_default());
            }
            ExitCode::from(if bad == 0 { OK } else { PARTIAL })
        }
        Err(e) => fail(harness_code(&e), e),
    }
}

fn load(path: &Path, limit: Option<usize>) -> Result<BitStream, String> {
    let s = bits::load_any(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(match limit {
        Some(n) => s.prefix(n),
        None => s,
    })
}

fn summary(reports: &[Sts22Report], alpha: f64) -> Result<String, String> {
    let n = reports.len();
    let mut out = format!("{n} sequences, alpha = {alpha}\n{:<22} {:>9} {:>12} {:>6}\n", "subtest", "passed", "uniformity", "ok");
    for (i, r) in reports[0].results.iter().enumerate() {
        let ps: Vec<PValue> = reports.iter().map(|x| x.results.get(i).map_or(PValue::NotApplicable, |s| s.p_value)).collect();
        let prop = sts22::proportion_pass(&ps, alpha, n).map_err(|e| e.to_string())?;
        let (unif, unif_ok) = match sts22::uniformity(&ps) {
            Ok(u) => (format!("{:.6}", u.p_value), u.pass),
            Err(_) => ("NA".to_string(), true),
        };
        let ok = if prop.pass && unif_ok { "" } else { "*" };
        out.push_str(&format!(
            "{:<22} {:>9} {:>12} {:>6}\n",
            Sts22Report::column_key(r),
            format!("{}/{}", prop.passed, n),
            unif,
            ok
        ));
    }
    Ok(out)
}

fn cmd_test22(a: Test22Args) -> ExitCode {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return fail(INVALID, format!("alpha {} outside (0, 1)", a.alpha));
    }
    let params = Sts22Params::default();
    let mut reports = Vec::new();
    for f in &a.files {
        let stream = match load(f, a.bits) {
            Ok(s) => s,
            Err(e) => return fail(PARTIAL, e),
        };
        match sts22::run_battery_with(&stream, &params, exec(a.sequential)) {
            Ok(r) => {
                if a.json {
                    println!("{}", r.to_json());
                } else {
                    println!("== {}", f.display());
                    print!("{}", r.to_text());
                }
                reports.push(r);
            }
            Err(e) => return fail(PARTIAL, format!("{}: {e}", f.display())),
        }
    }
    if reports.len() > 1 && !a.json {
        match summary(&reports, a.alpha) {
            Ok(s) => print!("{s}"),
            Err(e) => return fail(PARTIAL, e),
        }
    }
    ExitCode::from(OK)
}

fn cmd_test90b(a: Test90bArgs) -> ExitCode {
    for f in &a.files {
        let stream = match load(f, a.bits) {
            Ok(s) => s,
            Err(e) => return fail(PARTIAL, e),
        };
        match ent90b::min_entropy_with(&stream, exec(a.sequential)) {
            Ok(r) => {
                if a.json {
                    println!("{}", r.to_json_value());
                } else {
                    println!("== {}", f.display());
                    print!("{}", r.to_text());
                }
            }
            Err(e) => return fail(PARTIAL, format!("{}: {e}", f.display())),
        }
    }
    ExitCode::from(OK)
}

fn load_manifest(run: &Path) -> Result<RunManifest, ExitCode> {
    RunManifest::load(&run.join(MANIFEST_FILE)).map_err(|e| fail(INVALID, e))
}

fn cmd_analyze(a: AnalyzeArgs) -> ExitCode {
    let manifest = match load_manifest(&a.run) {
        Ok(m) => m,
        Err(c) => return c,
    };
    let eval = match harness::evaluate(&manifest, &a.run, &a.what, exec(a.sequential)) {
        Ok(e) => e,
        Err(e) => return fail(harness_code(&e), e),
    };
    let out = a.out.unwrap_or_else(|| a.run.join("reports"));
    if let Err(e) = eval.write(&out) {
        return fail(PARTIAL, e);
    }
    let bad = eval.stream_errors() + manifest.failures();
    println!("{} streams evaluated, {} with errors, reports in {}", eval.streams.len(), bad, out.display());
    ExitCode::from(if bad == 0 { OK } else { PARTIAL })
}

fn cmd_report(a: ReportArgs) -> ExitCode {
    let manifest = match load_manifest(&a.run) {
        Ok(m) => m,
        Err(c) => return c,
    };
    let eval = match harness::evaluate(&manifest, &a.run, &[Analysis::Biasfit], Exec::Sequential) {
        Ok(e) => e,
        Err(e) => return fail(harness_code(&e), e),
    };
    if a.json {
        let doc = serde_json::json!({
            "frequency_table": eval.frequency_table.as_ref().map(|t| t.to_json_value()),
            "subset_table": eval.subset_table.as_ref().map(|t| t.to_json_value()),
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        if let Some(t) = &eval.frequency_table {
            println!("Percentage of 1s by circuit and qubit\n{}", t.to_text());
        }
        if let Some(t) = &eval.subset_table {
            println!("Percentage of 1s for GHZ subsets\n{}", t.to_text());
        }
    }
    ExitCode::from(if manifest.failures() == 0 { OK } else { PARTIAL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Test22(a) => cmd_test22(a),
        Command::Test90b(a) => cmd_test90b(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Report(a) => cmd_report(a),
    }
}
