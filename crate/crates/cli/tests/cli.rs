use std::path::Path;
use std::process::{Command, Output};

const S1: &str = "[1,1,1,-7,16,6,-9,12]";

fn k3rank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_k3rank"))
        .args(args)
        .env("K3RANK_RESULTS_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn sample_lands_in_results_dir_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let o = k3rank(dir.path(), &["sample", "--count", "5", "--seed", "9", "--out", name]);
        assert!(o.status.success());
    }
    let a = std::fs::read_to_string(dir.path().join("a.json")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    let v: Vec<[i64; 8]> = serde_json::from_str(&a).unwrap();
    assert_eq!(v.len(), 5);
    assert!(v.iter().all(|c| c[..3] == [1, 1, 1]));
}

#[test]
fn analyze_prints_one_record_per_prime() {
    let dir = tempfile::tempdir().unwrap();
    let o = k3rank(dir.path(), &["analyze", "--coeffs", S1, "--primes", "5..13"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let ps: Vec<u64> = lines.iter().map(|r| r["p"].as_u64().unwrap()).collect();
    assert_eq!(ps, [5, 7, 11, 13]);
    let good: Vec<_> = lines.iter().filter(|r| r["outcome"] == "ok").collect();
    assert_eq!(good.len(), 2);
    assert!(good.iter().all(|r| r["bound"].as_u64().unwrap() >= 16));
}

#[test]
fn malformed_coefficients_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = k3rank(dir.path(), &["analyze", "--coeffs", "[1,2,3]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected 8 integers"));
}

#[test]
fn batch_resume_skips_finished_work() {
    let dir = tempfile::tempdir().unwrap();
    assert!(k3rank(dir.path(), &["sample", "--count", "2", "--seed", "3"]).status.success());
    let first = k3rank(dir.path(), &["batch", "--sample", "sample.json", "--primes", "5,7,11"]);
    assert!(first.status.success());
    let lines = std::fs::read_to_string(dir.path().join("results.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 6);
    let again = k3rank(dir.path(), &["batch", "--sample", "sample.json", "--primes", "5,7,11,13", "--resume"]);
    assert!(again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("computed 2, skipped 6"));
    let lines = std::fs::read_to_string(dir.path().join("results.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 8);

    let rep = k3rank(dir.path(), &["report", "--format", "csv", "--assume-generic"]);
    assert!(rep.status.success());
    let text = stdout(&rep);
    assert!(text.contains("p,good,bound16"));
    assert!(text.contains("class,count"));
}

#[test]
fn inconsistent_results_give_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = k3rank(dir.path(), &["analyze", "--coeffs", S1, "--primes", "11"]);
    let mut rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    rec["outcome"] = "inconsistent".into();
    std::fs::write(dir.path().join("bad.jsonl"), format!("{rec}\n")).unwrap();
    let rep = k3rank(dir.path(), &["report", "--in", "bad.jsonl", "--assume-generic"]);
    assert_eq!(rep.status.code(), Some(2));
}
