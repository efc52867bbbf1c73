use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use giss_clime::linalg::io::load;

fn spm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spm"))
        .args(args)
        .env_remove("SPM_THREADS")
        .output()
        .expect("spawn spm")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_writes_file_contract() {
    let dir = tempfile::tempdir().unwrap();
    let out = spm(&["gen", "case2", "--p", "12", "--seed", "3", "--n", "40", "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["sigma.bin", "omega.bin", "spec.json", "data.bin", "sample_cov.bin"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let data = load(&dir.path().join("data.bin")).unwrap();
    assert_eq!(data.shape(), (40, 12));
    let spec: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("spec.json")).unwrap()).unwrap();
    assert_eq!(spec["p"], 12);
    assert_eq!(spec["case"], "case2");

    let csv = tempfile::tempdir().unwrap();
    let out = spm(&["gen", "case1", "--p", "5", "--format", "csv", "--out", s(csv.path())]);
    assert!(out.status.success());
    let omega = load(&csv.path().join("omega.csv")).unwrap();
    assert_eq!(omega.count_above(0.0), 13);
}

#[test]
fn estimate_then_metrics_zero_loss() {
    let dir = tempfile::tempdir().unwrap();
    assert!(spm(&["gen", "case1", "--p", "20", "--out", s(dir.path())]).status.success());
    let est = dir.path().join("est.bin");
    let tel = dir.path().join("tel.jsonl");
    let out = spm(&[
        "estimate",
        "--sigma",
        s(&dir.path().join("sigma.bin")),
        "--out",
        s(&est),
        "--lambda",
        "1e-9",
        "--threshold",
        "1e-6",
        "--telemetry",
        s(&tel),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&tel).unwrap().lines().count(), 20);

    let out = spm(&["metrics", "--estimate", s(&est), "--truth", s(&dir.path().join("omega.bin"))]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["frobenius"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["nnz_at"]["1e-4"], 58);
    assert_eq!(report["tp_pct"], 100.0);

    let self_cmp = spm(&["metrics", "--estimate", s(&dir.path().join("omega.bin")), "--truth", s(&dir.path().join("omega.bin"))]);
    let report: serde_json::Value = serde_json::from_slice(&self_cmp.stdout).unwrap();
    assert_eq!(report["frobenius"], 0.0);
    assert_eq!(report["operator"], 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(spm(&["estimate"]).status.code(), Some(1));
    assert_eq!(spm(&["nonsense"]).status.code(), Some(1));
    assert_eq!(spm(&["estimate", "--sigma", "/nonexistent/x.bin", "--out", "/tmp/x.bin", "--lambda", "0.1"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    assert!(spm(&["gen", "case1", "--p", "10", "--out", s(dir.path())]).status.success());
    // p·λ ≥ 1 makes the Lemma-1 error bound undefined
    let sigma = dir.path().join("sigma.bin");
    let omega = dir.path().join("omega.bin");
    let out = spm(&[
        "diagnose", "--sigma", s(&sigma), "--omega0", s(&omega), "--sigma0", s(&sigma), "--lambda", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = spm(&["diagnose", "--sigma", s(&sigma), "--s", "2"]);
    assert!(out.status.success());
}

#[test]
fn config_file_supplies_and_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"p": 6, "no_timing": true, "solvers": ["giss", "htp"]}"#).unwrap();
    let out = spm(&["bench", "case1", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("GISS,16,16,"), "{text}");
    assert!(text.contains("HTP,16,16,"), "{text}");
    assert!(!text.contains("ADMM"));

    fs::write(&cfg, r#"{"p": 0}"#).unwrap();
    assert_eq!(spm(&["bench", "case1", "--config", s(&cfg), "--solvers", "giss"]).status.code(), Some(1));
}

#[test]
fn bench_output_is_deterministic_across_workers() {
    let run = |threads: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_spm"))
            .args([
                "bench", "case2", "--p", "15", "--n", "40", "--c-lambda", "0.7", "--replicates", "3", "--seed", "9",
                "--solvers", "giss,htp", "--no-timing", "--out", s(dir.path()),
            ])
            .env("SPM_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            out.stdout,
            fs::read(dir.path().join("case2_losses.csv")).unwrap(),
            fs::read(dir.path().join("case2_recovery.csv")).unwrap(),
        )
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert!(String::from_utf8_lossy(&one.1).starts_with("# spm-bench/v1"));
}
