mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::data;

fn sdgimpute(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdgimpute"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn d(name: &str) -> String {
    data(name).display().to_string()
}

#[test]
fn impute_nba() {
    let dir = tempfile::tempdir().unwrap();
    let dict = format!("Location={}", d("nba_location.dict"));
    let args = [
        "impute", "--table", &d("nba.csv"), "--rules", &d("nba.fd"), "--corpus", &d("nba.jsonl"),
        "--k", "0.5", "--K", "0.8", "--dict", &dict, "--out", "out.csv", "--report", "r.json",
    ];
    let o = sdgimpute(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert!(out.contains("t4,Golden State Warriors,1966-1967,CivicAuditorium,SanFrancsicoCA,7500,"));
    assert!(out.contains("t5,Atlanta Hawks,1949-1951,WheatonFieldHouse,WheatonIL,,Arnold Jacob"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["counts"]["filled_pattern"], 1);
    assert!(report.get("timings").is_none());

    // identical second run, byte for byte
    let first = (out, std::fs::read(dir.path().join("r.json")).unwrap());
    assert_eq!(sdgimpute(&args, dir.path()).status.code(), Some(0));
    let again = (
        std::fs::read_to_string(dir.path().join("out.csv")).unwrap(),
        std::fs::read(dir.path().join("r.json")).unwrap(),
    );
    assert_eq!(first, again);
}

#[test]
fn sdg_dot_has_nine_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdgimpute(&["sdg", "--rules", &d("nba.fd"), "--table", &d("nba.csv"), "--dot", "g.dot"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let dot = std::fs::read_to_string(dir.path().join("g.dot")).unwrap();
    let nodes = dot.lines().filter(|l| l.contains("shape=")).count();
    assert_eq!(nodes, 9);
}

#[test]
fn usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = sdgimpute(&["impute"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(sdgimpute(&["impute", "--bogus"], dir.path()).status.code(), Some(1));
    let missing = sdgimpute(&["impute", "--table", "nope.csv", "--rules", &d("nba.fd")], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    let bad_k = sdgimpute(&["impute", "--table", &d("nba.csv"), "--rules", &d("nba.fd"), "--K", "2"], dir.path());
    assert_eq!(bad_k.status.code(), Some(1));
    std::fs::write(dir.path().join("bad.fd"), "f1 Arena -> Location\n").unwrap();
    let bad_rules = sdgimpute(&["impute", "--table", &d("nba.csv"), "--rules", "bad.fd"], dir.path());
    assert_eq!(bad_rules.status.code(), Some(2));
}

#[test]
fn help_and_version_need_no_files() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let o = sdgimpute(&[flag], dir.path());
        assert_eq!(o.status.code(), Some(0));
        assert!(!o.stdout.is_empty());
    }
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn mask_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "mask", "--table", &d("film.csv"), "--rules", &d("film.fd"), "--ratio", "0.5", "--seed", "3",
        "--protect", "Num", "--out", "masked.csv", "--truth", "truth.json",
    ];
    let o = sdgimpute(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth.as_array().unwrap().len(), 7);

    let o = sdgimpute(&["eval", "--truth", "truth.json", "--table", &d("film.csv")], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["accuracy"], 1.0);
    assert_eq!(m["filling_ratio"], 1.0);

    let o = sdgimpute(&["eval", "--truth", "truth.json", "--table", "masked.csv"], dir.path());
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["filling_ratio"], 0.0);
}

#[test]
fn mine_patterns_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "mine-patterns", "--table", &d("film.csv"), "--corpus", &d("film.jsonl"), "--pair", "Film,Director",
        "--min-support", "4", "--out", "p.json",
    ];
    let o = sdgimpute(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(p[0]["context"], serde_json::json!(["director", "of"]));
    assert_eq!(p[0]["direction"], "attr2_first");
    assert_eq!(p[0]["support"], 7);
    let no_provider = sdgimpute(&["mine-patterns", "--table", &d("film.csv"), "--pair", "Film,Director"], dir.path());
    assert_eq!(no_provider.status.code(), Some(1));
}

#[test]
fn sweep_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "Q": 3,
        "provider": {"kind": "local", "corpus": d("film.jsonl")},
        "dictionaries": {"Director": [d("film_director.dict")]}
    });
    std::fs::write(dir.path().join("run.json"), cfg.to_string()).unwrap();
    let args = [
        "sweep", "--table", &d("film.csv"), "--rules", &d("film.fd"), "--config", "run.json",
        "--ratios", "0.2,0.4", "--seeds", "1,2", "--protect", "Num", "--out", "s.csv", "--summary", "s.txt",
    ];
    let o = sdgimpute(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    // films have no determinant, so only directors come back, and always correctly
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[6], "1.000000", "{line}");
        assert!(fields[8].is_empty(), "{line}");
    }
    let summary = std::fs::read_to_string(dir.path().join("s.txt")).unwrap();
    assert_eq!(summary.lines().count(), 2);
}
