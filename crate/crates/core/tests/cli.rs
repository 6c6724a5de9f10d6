use std::path::Path;
use std::process::{Command, Output};

use pbqn::bench::CSV_HEADER;

fn pbqn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbqn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "run",
        "--synthetic",
        "logistic:800:40",
        "--budget-fge",
        "6",
        "--s0",
        "64",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    pbqn(&args)
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for mode in ["mb", "fo"] {
        assert!(run_into(a.path(), &["--mode", mode]).status.success());
        assert!(run_into(b.path(), &["--mode", mode]).status.success());
        for ext in ["csv", "json"] {
            let name = format!("pbqn-{mode}.{ext}");
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            assert!(!x.is_empty());
            assert_eq!(x, y, "{name} differs");
        }
    }
}

#[test]
fn csv_and_manifest_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("pbqn-mb.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 1);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pbqn-mb.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_u64(), Some(rows.len() as u64));
    assert_eq!(json["input_hash"].as_str().map(str::len), Some(64));
    let fge: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(fge.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn baseline_runs_with_a_fixed_steplength() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["--optimizer", "svrg", "--alpha", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("svrg.csv").is_file());
}

#[test]
fn perfmodel_prints_the_default_threshold() {
    let out = pbqn(&["perfmodel"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "threshold=0.9375");
    let out = pbqn(&["perfmodel", "--iters-large", "1", "--iters-small", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("pbqn_faster=true"), "{text}");
}

#[test]
fn verify_reports_key_value_lines() {
    let out = pbqn(&["verify", "--reduce", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    for name in ["linear_rate", "descent_lemma", "sublinear_rate"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(pbqn(&["run"]).status.code(), Some(2));
    let out = pbqn(&["run", "--synthetic", "cubic:3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("pbqn: "));
    let out = pbqn(&["rstar", "--dataset", "/nonexistent/file"]);
    assert_eq!(out.status.code(), Some(1));
}
