//! End-to-end CLI tests: exact subcommand surfaces, file outputs, exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shufflehist"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("shufflehist-cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(format!("{name}-{}", std::process::id()))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_params_reference_point() {
    let out = bin()
        .args([
            "solve-params",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--n",
            "1000",
            "--k",
            "1",
            "--mode",
            "max",
            "--d",
            "100",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["q"].as_f64().unwrap() - 0.245384).abs() < 1e-5);
    assert!((v["scale"].as_f64().unwrap() - 1.963745).abs() < 1e-5);
    assert!((v["q_tilde"].as_f64().unwrap() - 0.0038005).abs() < 1e-6);
}

#[test]
fn solve_params_default_k_and_tight_bound() {
    let out = bin()
        .args([
            "solve-params",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--n",
            "1000",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["k"], 1);
    assert!((v["bound"].as_f64().unwrap() - 0.130819).abs() < 1e-4);
    assert!(v["bound_tight"].as_f64().unwrap() <= v["bound"].as_f64().unwrap());
}

#[test]
fn solve_params_out_of_regime_exit_2() {
    let out = bin()
        .args([
            "solve-params",
            "--eps",
            "1",
            "--delta",
            "0.5",
            "--n",
            "1000",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_zipf_writes_versioned_outputs() {
    let prefix = tmp("run1");
    let out = bin()
        .args([
            "run",
            "--protocol",
            "flip2",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--k",
            "2,3",
            "--trials",
            "6",
            "--seed",
            "3",
            "--zipf",
            "400,16,1.1",
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "# shufflehist-results v1");
    assert!(lines
        .next()
        .unwrap()
        .starts_with("trial,protocol,k,q,max_error,bound,runtime_ms"));
    assert_eq!(lines.count(), 12, "trials x sweep rows");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(json["meta"]["schema"], "shufflehist-results v1");
    assert_eq!(json["meta"]["resolved"].as_array().unwrap().len(), 2);
}

#[test]
fn run_corpus_lenient_mode() {
    let vocab = tmp("vocab.txt");
    let records = tmp("records.txt");
    std::fs::write(&vocab, "apple\nbanana\ncherry\n").unwrap();
    std::fs::write(&records, "banana\nbanana\napple\nunknowntoken\n").unwrap();
    let prefix = tmp("run-corpus");
    // strict: exit 1 on the unknown token
    let out = bin()
        .args([
            "run",
            "--protocol",
            "flip2",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--trials",
            "2",
            "--seed",
            "1",
            "--vocab",
            vocab.to_str().unwrap(),
            "--records",
            records.to_str().unwrap(),
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    // lenient: succeeds and reports the skip
    let out = bin()
        .args([
            "run",
            "--protocol",
            "flip2",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--trials",
            "2",
            "--seed",
            "1",
            "--vocab",
            vocab.to_str().unwrap(),
            "--records",
            records.to_str().unwrap(),
            "--lenient",
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1"));
}

#[test]
fn run_infeasible_exit_2_and_missing_file_exit_1() {
    let prefix = tmp("run-bad");
    let out = bin()
        .args([
            "run",
            "--protocol",
            "flip2",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--k",
            "1",
            "--trials",
            "2",
            "--seed",
            "1",
            "--zipf",
            "10,4,1.1",
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "k=1 infeasible at n=10");

    let out = bin()
        .args([
            "run",
            "--protocol",
            "flip2",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--trials",
            "2",
            "--seed",
            "1",
            "--vocab",
            "/nonexistent/vocab.txt",
            "--records",
            "/nonexistent/records.txt",
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_dump_messages_parseable() {
    let prefix = tmp("run-dump");
    let dump = tmp("dump.txt");
    let out = bin()
        .args([
            "run",
            "--protocol",
            "flip2",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--k",
            "4",
            "--trials",
            "1",
            "--seed",
            "5",
            "--zipf",
            "200,16,1.1",
            "--out",
            prefix.to_str().unwrap(),
            "--dump-messages",
            dump.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(text.lines().count(), 1000, "n (k+1) message lines");
    for line in text.lines() {
        shufflehist::compact::parse_message(line, 16).unwrap();
    }
}

#[test]
fn attack_flip_csv_schema() {
    let prefix = tmp("attack-flip");
    let out = bin()
        .args([
            "attack",
            "--protocol",
            "flip",
            "--strategy",
            "flood-bit",
            "--target",
            "8",
            "--m",
            "10",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--trials",
            "50",
            "--seed",
            "2",
            "--zipf",
            "500,8,1.1",
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "# shufflehist-attack v1");
    assert_eq!(
        lines.next().unwrap(),
        "trial,protocol,strategy,m,z_target_honest,z_target_corrupt,bias,bound"
    );
    assert_eq!(lines.clone().count(), 50);
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "flip");
        assert_eq!(cols[2], "flood-bit");
        let bias: f64 = cols[6].parse().unwrap();
        let bound: f64 = cols[7].parse().unwrap();
        assert!(bias.abs() <= bound + 1e-12);
    }
}

#[test]
fn attack_had_reports_comparison() {
    let prefix = tmp("attack-had");
    let out = bin()
        .args([
            "attack",
            "--protocol",
            "had",
            "--strategy",
            "had-flood",
            "--target",
            "4",
            "--m",
            "50",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--trials",
            "60",
            "--seed",
            "2",
            "--zipf",
            "1024,4,8.0",
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap())
            .unwrap();
    let ratio = json["per_corrupt_user_bias"]["ratio_had_over_flip"]
        .as_f64()
        .unwrap();
    assert!(ratio > 1.0, "per-corrupt-user bias ratio {ratio}");
}

#[test]
fn attack_rejects_mismatched_strategy() {
    let prefix = tmp("attack-bad");
    let out = bin()
        .args([
            "attack",
            "--protocol",
            "flip",
            "--strategy",
            "had-flood",
            "--target",
            "1",
            "--m",
            "1",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--zipf",
            "100,4,1.1",
            "--out",
            prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn audit_privacy_grid_rows() {
    let out = bin()
        .args([
            "audit-privacy",
            "--m-max",
            "60",
            "--m-min",
            "30",
            "--m-step",
            "30",
            "--grid",
            "q=0.3,0.45,eps=1,delta=0.01",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# shufflehist-audit v1");
    assert_eq!(
        lines.next().unwrap(),
        "m,q,eps,delta_target,delta_tight,pass"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 2);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        let tight: f64 = cols[4].parse().unwrap();
        assert!((0.0..1.0).contains(&tight));
    }
}

#[test]
fn topk_reads_run_json() {
    let prefix = tmp("run-topk");
    let out = bin()
        .args([
            "run",
            "--protocol",
            "flip2",
            "--eps",
            "1",
            "--delta",
            "0.01",
            "--k",
            "2",
            "--trials",
            "4",
            "--seed",
            "9",
            "--zipf",
            "500,32,1.4",
            "--out",
            prefix.to_str().unwrap(),
            "--store-estimates",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .args([
            "topk",
            "--t",
            "3,5",
            "--input",
            prefix.with_extension("json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# shufflehist-topk v1");
    assert_eq!(lines.next().unwrap(), "t,alpha_observed,alpha_bound,f1");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        let alpha: f64 = cols[1].parse().unwrap();
        let bound: f64 = cols[2].parse().unwrap();
        let f1: f64 = cols[3].parse().unwrap();
        assert!(alpha >= 0.0);
        assert!(bound > 0.0);
        assert!((0.0..=1.0).contains(&f1));
    }
}
