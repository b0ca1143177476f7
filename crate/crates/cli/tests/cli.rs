use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coarse-sigma"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let mut full = args.to_vec();
    full.push("--json");
    let out = run(&full);
    let value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    (out.status.code().unwrap(), value)
}

fn path(name: &str) -> String {
    data(name).display().to_string()
}

#[test]
fn sigma_discrete_book_sizes() {
    let (code, v) = run_json(&["sigma", "--space", &path("D25.json"), "--window", "1:10"]);
    assert_eq!(code, 0);
    let counts: Vec<u64> = v["report"]["levels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["count"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, (1..=10).collect::<Vec<_>>());
}

#[test]
fn sigma_on_a_point_is_empty() {
    let (code, v) = run_json(&["sigma", "--space", &path("point.json"), "--window", "1:3"]);
    assert_eq!(code, 0);
    assert!(v["report"]["levels"].as_array().unwrap().iter().all(|l| l["count"] == 0));
}

#[test]
fn sigma_oracle_agrees_on_small_space() {
    let (code, v) = run_json(&["sigma", "--space", &path("random12.json"), "--window", "1:3", "--radius", "9", "--oracle"]);
    assert_eq!(code, 0);
    assert_eq!(v["oracle"].as_array().unwrap().len(), 3);
}

#[test]
fn sigma_writes_dot_files() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("dot");
    let out = run(&["sigma", "--space", &path("D25.json"), "--window", "1:2", "--dot", dot.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(dot.join("sigma_2.dot")).unwrap();
    assert!(text.starts_with("digraph") || text.starts_with("graph"));
}

#[test]
fn exit_codes() {
    let thin = run(&["sigma", "--space", &path("D25.json"), "--window", "1:6", "--radius", "8"]);
    assert_eq!(thin.status.code(), Some(3));

    let guard = run(&["sigma", "--space", &path("z2.json"), "--window", "1:3", "--radius", "12", "--oracle"]);
    assert_eq!(guard.status.code(), Some(4));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"kind":"discrete_open_book","params":{"num_rays":"many"}}"#).unwrap();
    let input = run(&["sigma", "--space", bad.to_str().unwrap()]);
    assert_eq!(input.status.code(), Some(2));
    assert!(!input.stderr.is_empty());
}

#[test]
fn compare_books() {
    let (code, v) = run_json(&["compare", &path("B10.json"), &path("D25.json"), "--window", "1:3"]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "not_equivalent");

    let (code, v) = run_json(&["compare", &path("D25.json"), &path("D25.json"), "--window", "1:4"]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "equivalent-verified");
}

#[test]
fn compare_reals_and_integers_with_maps() {
    let (code, v) = run_json(&[
        "compare",
        &path("reals.json"),
        &path("ints.json"),
        "--forward",
        &path("floor.json"),
        "--backward",
        &path("inclusion.json"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "equivalent-verified");
}

#[test]
fn compare_integers_and_plane() {
    let (_, v) = run_json(&["compare", &path("ints.json"), &path("z2.json"), "--window", "1:3"]);
    assert_eq!(v["verdict"], "not_equivalent");
}

#[test]
fn limit_of_sigma_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sigma.json");
    let status = run(&["sigma", "--space", &path("D25.json"), "--window", "1:10", "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    let (code, v) = run_json(&["limit", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["cardinality"], 10);
}

#[test]
fn limit_of_symbolic_sequence_is_countable() {
    let (code, v) = run_json(&["limit", &path("indsigma-D.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["cardinality"], "omega");
}

#[test]
fn verify_paper_passes_and_filters() {
    let (code, v) = run_json(&["verify-paper"]);
    assert_eq!(code, 0);
    assert_eq!(v["passed"], true);
    assert_eq!(v["examples"].as_array().unwrap().len(), 5);

    let (code, v) = run_json(&["verify-paper", "--filter", "open_book"]);
    assert_eq!(code, 0);
    let names: Vec<&str> = v["examples"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["open_book"]);
}

#[test]
fn verify_paper_reports_corrupted_golden() {
    let dir = tempfile::tempdir().unwrap();
    let goldens = dir.path().to_str().unwrap();
    assert!(run(&["verify-paper", "--write-goldens", goldens]).status.success());

    let file = dir.path().join("discrete_open_book.json");
    let mut golden: Value = serde_json::from_str(&fs::read_to_string(&file).unwrap()).unwrap();
    golden["results"]["sizes"][2] = Value::from(9);
    fs::write(&file, serde_json::to_string_pretty(&golden).unwrap()).unwrap();

    let out = run(&["verify-paper", "--goldens", goldens, "--filter", "discrete_open_book"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("golden differs at $.results.sizes[2]"), "{text}");
}

#[test]
fn verify_paper_json_is_deterministic() {
    let a = run(&["verify-paper", "--json"]);
    let b = run(&["verify-paper", "--json"]);
    assert_eq!(a.stdout, b.stdout);
}
