use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_prodtraj"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) {
    let o = run(args);
    assert_eq!(code(&o), 0, "{args:?} failed: {}", stderr(&o));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Noise-free positive-rate shapes on integer parameters, so a
/// simulate -> fit round trip is exact.
const EXACT_SPEC: &str = r#"{
  "n_faculty": 40,
  "career_length_range": [10, 14],
  "count_noise": {"law": "none"},
  "lattice": true,
  "components": [
    {"label": "canonical", "weight": 1, "m1": {"lo": 2, "hi": 3}, "m2": {"lo": -1, "hi": -1},
     "b": {"lo": 2, "hi": 4}, "t_star": {"lo": 4, "hi": 6}},
    {"label": "growth", "weight": 1, "m1": {"lo": 1, "hi": 1}, "m2": {"lo": 3, "hi": 3},
     "b": {"lo": 1, "hi": 2}, "t_star": {"lo": 3, "hi": 6}},
    {"label": "dip", "weight": 1, "m1": {"lo": -1, "hi": -1}, "m2": {"lo": 2, "hi": 2},
     "b": {"lo": 8, "hi": 9}, "t_star": {"lo": 3, "hi": 5}},
    {"label": "line", "weight": 1, "m1": {"lo": 1, "hi": 1}, "m2": {"lo": 0, "hi": 0},
     "b": {"lo": 2, "hi": 3}, "t_star": {"lo": 4, "hi": 5}, "linear": true}
  ]
}"#;

const IDENTITY_MODEL: &str =
    r#"{"m_alpha": 0, "b_alpha": 1, "m_beta": 0, "b_beta": 1, "reference_year": 2011, "normalize_growth": true}"#;

struct Sim {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Sim {
    fn faculty(&self) -> PathBuf {
        self.root.join("faculty.jsonl")
    }
    fn pubs(&self) -> PathBuf {
        self.root.join("publications.jsonl")
    }
}

fn simulate(extra: &[&str]) -> Sim {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let mut args = vec!["simulate", "--out-dir", s(&root)];
    args.extend_from_slice(extra);
    ok(&args);
    Sim { _dir: dir, root }
}

#[test]
fn no_subcommand_is_usage_error() {
    let o = run(&[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("simulate"));
}

#[test]
fn unknown_flag_is_usage_error_with_help() {
    let o = run(&["fit", "--faculty", "a", "--pubs", "b", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("--no-such-flag"), "{err}");
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn report_without_inputs_is_usage_error() {
    assert_eq!(code(&run(&["report"])), 1);
}

#[test]
fn report_on_empty_directory_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "--in-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(s(dir.path())));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent_faculty.jsonl");
    let o = run(&["fit", "--faculty", s(&missing), "--pubs", s(&missing), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("absent_faculty.jsonl"), "{}", stderr(&o));
}

#[test]
fn out_of_range_threshold_is_usage_error() {
    let sim = simulate(&["--n-faculty", "3", "--seed", "1"]);
    let o = run(&[
        "stability",
        "--faculty",
        s(&sim.faculty()),
        "--pubs",
        s(&sim.pubs()),
        "--seed",
        "1",
        "--stability-threshold",
        "1.5",
        "--out-dir",
        s(&sim.root),
    ]);
    assert_eq!(code(&o), 1);
    let bad_criterion = run(&["fit", "--faculty", "a", "--pubs", "b", "--criterion", "xic"]);
    assert_eq!(code(&bad_criterion), 1);
}

#[test]
fn calibrate_fits_two_point_line() {
    let dir = tempfile::tempdir().unwrap();
    let bench = dir.path().join("bench.csv");
    fs::write(&bench, "year,dblp_count,cv_count\n1980,5,10\n2010,8,10\n").unwrap();
    ok(&["calibrate", "--benchmarks", s(&bench), "--out-dir", s(dir.path())]);
    let model = read_json(&dir.path().join("adjustment_model.json"));
    assert!((model["m_alpha"].as_f64().unwrap() - 0.01).abs() < 1e-12);
    assert!((model["b_alpha"].as_f64().unwrap() + 19.3).abs() < 1e-9);
    let fit = read_json(&dir.path().join("coverage_fit.json"));
    assert!((fit["r_squared"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let one_year = dir.path().join("one.csv");
    fs::write(&one_year, "year,dblp_count,cv_count\n1980,5,10\n").unwrap();
    assert_eq!(code(&run(&["calibrate", "--benchmarks", s(&one_year), "--out-dir", s(dir.path())])), 2);
}

#[test]
fn simulate_fit_classify_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let spec = root.join("spec.json");
    let model = root.join("identity.json");
    fs::write(&spec, EXACT_SPEC).unwrap();
    fs::write(&model, IDENTITY_MODEL).unwrap();
    ok(&["simulate", "--spec", s(&spec), "--seed", "21", "--model", s(&model), "--out-dir", s(root)]);
    ok(&[
        "fit",
        "--faculty",
        s(&root.join("faculty.jsonl")),
        "--pubs",
        s(&root.join("publications.jsonl")),
        "--model",
        s(&model),
        "--out-dir",
        s(root),
    ]);
    ok(&[
        "classify",
        "--fits",
        s(&root.join("fits.csv")),
        "--truth",
        s(&root.join("truth.csv")),
        "--out-dir",
        s(root),
    ]);
    let summary = read_json(&root.join("truth_recovery.json"));
    assert_eq!(summary["n"], 40);
    assert_eq!(summary["quadrant_agreement"], 1.0);
    assert_eq!(summary["model_agreement"], 1.0);
    assert_eq!(summary["canonical_agreement"], 1.0);
    assert!(summary["median_abs_err_t_star_kinked"].as_f64().unwrap() < 1e-4);

    let population = read_json(&root.join("population_summary.json"));
    assert_eq!(population["stability_assumed"], true);
    let meta = read_json(&root.join("run_metadata_classify.json"));
    assert_eq!(meta["decisions"]["stability_assumed"], true);

    ok(&["report", "--in-dir", s(root)]);
    let md = fs::read_to_string(root.join("report.md")).unwrap();
    assert!(md.contains("Recovery of synthetic truth"));
    assert!(md.contains("quadrant_agreement: 1.0000"));
}

fn tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "jsonl" || e == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn pipeline(root: &Path, threads: &str) {
    ok(&["simulate", "--n-faculty", "12", "--seed", "8", "--out-dir", s(root)]);
    let f = root.join("faculty.jsonl");
    let p = root.join("publications.jsonl");
    let corpus = ["--faculty", s(&f), "--pubs", s(&p), "--out-dir", s(root), "--threads", threads];
    let with = |cmd: &[&'static str]| [cmd, &corpus[..]].concat();
    ok(&with(&["fit", "--count-family", "negbin"]));
    ok(&with(&["stability", "--seed", "4", "--trials", "12"]));
    ok(&with(&["ensemble", "--seed", "4", "--trials", "6"]));
    ok(&with(&["authorship", "--seed", "4", "--mode", "monte-carlo", "--mc-draws", "2000"]));
    ok(&with(&["gini", "--window-years", "lifetime"]));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path(), "1");
    pipeline(b.path(), "3");
    let ta = tables(a.path());
    let tb = tables(b.path());
    assert_eq!(ta.len(), tb.len());
    assert!(ta.iter().any(|(n, _)| n == "stability.csv"));
    for ((na, ba), (nb, bb)) in ta.iter().zip(&tb) {
        assert_eq!(na, nb);
        if na.starts_with("run_metadata_") {
            // identical apart from the paths and thread count in the echoed config
            let mut ma: Value = serde_json::from_slice(ba).unwrap();
            let mut mb: Value = serde_json::from_slice(bb).unwrap();
            ma["config"] = Value::Null;
            mb["config"] = Value::Null;
            assert_eq!(ma, mb, "{na}");
        } else {
            assert!(ba == bb, "{na} differs between runs");
        }
    }
}

#[test]
fn generated_seed_is_recorded_and_reproduces() {
    let sim = simulate(&["--n-faculty", "5"]);
    let meta = read_json(&sim.root.join("run_metadata_simulate.json"));
    assert_eq!(meta["seed_generated"], true);
    let seed = meta["seed"].as_u64().unwrap().to_string();
    let again = simulate(&["--n-faculty", "5", "--seed", &seed]);
    assert_eq!(
        fs::read(sim.root.join("publications.jsonl")).unwrap(),
        fs::read(again.root.join("publications.jsonl")).unwrap()
    );
    assert_eq!(fs::read(sim.root.join("truth.csv")).unwrap(), fs::read(again.root.join("truth.csv")).unwrap());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let sim = simulate(&["--n-faculty", "4", "--seed", "2"]);
    let cfg = sim.root.join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"faculty": "{}", "pubs": "{}", "seed": 1, "trials": 5, "sigma": 0.5}}"#,
            s(&sim.faculty()),
            s(&sim.pubs())
        ),
    )
    .unwrap();
    ok(&["stability", "--config", s(&cfg), "--seed", "2", "--out-dir", s(&sim.root)]);
    let meta = read_json(&sim.root.join("run_metadata_stability.json"));
    assert_eq!(meta["seed"], 2);
    assert_eq!(meta["config"]["noise"]["trials"], 5);
    assert_eq!(meta["config"]["noise"]["sigma"], 0.5);

    let bad = sim.root.join("bad.json");
    fs::write(&bad, r#"{"no_such_option": 1}"#).unwrap();
    assert_eq!(code(&run(&["stability", "--config", s(&bad)])), 1);
}

#[test]
fn report_lists_only_existing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("gini.csv"), "decade,n_faculty,gini\n1990,4,0.25\n").unwrap();
    ok(&["report", "--in-dir", s(dir.path())]);
    let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("| 1990 | 4 | 0.25 |"));
    assert!(!md.contains("Trajectory classes"));
    let doc = read_json(&dir.path().join("report.json"));
    assert_eq!(doc["gini.csv"][0]["gini"], "0.25");
}
