use std::path::Path;
use std::process::{Command, Output};

use levsketch::matcore::DenseMatrix;
use levsketch_cli::io::{load_matrix, save_matrix, MatrixFormat};
use serde_json::Value;

fn levsketch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levsketch"))
        .args(args)
        .current_dir(dir)
        .env_remove("LEVSKETCH_SEED")
        .output()
        .expect("binary runs")
}

fn json(dir: &Path, args: &[&str]) -> Value {
    let out = levsketch(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn every_format_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = DenseMatrix::from_fn(7, 3, |i, j| {
        ((i * 3 + j) as f64).sin() * 10f64.powi(i as i32 - 3)
    });
    for (name, format) in [
        ("a.mtx", MatrixFormat::MatrixMarket),
        ("a.csv", MatrixFormat::Csv),
        ("a.bin", MatrixFormat::Binary),
    ] {
        let path = dir.path().join(name);
        save_matrix(&path, &a, format).unwrap();
        assert_eq!(load_matrix(&path, format).unwrap(), a, "{name}");
        assert_eq!(MatrixFormat::from_path(&path), format);
    }
}

#[test]
fn document_schema() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(levsketch(
        p,
        &[
            "gen",
            "planted",
            "--n",
            "300",
            "--d",
            "4",
            "--magnitude",
            "10",
            "-o",
            "a.csv"
        ]
    )
    .status
    .success());
    let doc = json(p, &["cross", "a.csv", "--kappa", "nlogn", "--seed", "3"]);
    let keys: Vec<&String> = doc.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["params", "result", "seed", "timings_ms"]);
    let result = &doc["result"];
    assert!(result["threshold"].as_f64().unwrap() > 0.0);
    let pairs = result["pairs"].as_array().unwrap();
    assert!(pairs.iter().any(|p| p[0] == 3 && p[1] == 7));
    for p in pairs {
        let p = p.as_array().unwrap();
        assert_eq!(p.len(), 3);
        assert!(p[0].as_u64().unwrap() <= p[1].as_u64().unwrap());
        assert!(p[2].as_f64().unwrap() >= result["threshold"].as_f64().unwrap());
    }
    let plan = &doc["params"]["plan"];
    assert!(plan["r1"].as_u64().unwrap() > 0 && plan["r2"].as_u64().unwrap() > 0);
    assert_eq!(doc["params"]["kappa"], "nlogn");
    for phase in ["sketch_apply", "factorization", "product", "norms"] {
        assert!(doc["timings_ms"][phase].is_number());
    }
}

#[test]
fn hadamard_fixture_scores_near_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(levsketch(
        p,
        &["gen", "hadamard", "--n", "1024", "--d", "8", "-o", "h.mtx"]
    )
    .status
    .success());
    let doc = json(
        p,
        &[
            "leverage",
            "h.mtx",
            "--eps",
            "0.5",
            "--seed",
            "7",
            "--mode",
            "practical",
        ],
    );
    let scores = floats(&doc["result"]["scores"]);
    assert_eq!(scores.len(), 1024);
    let target = 8.0 / 1024.0;
    assert!(scores.iter().all(|s| (s - target).abs() <= 0.5 * target));
    assert_eq!(doc["seed"], 7);
}

#[test]
fn degenerate_overrides_reproduce_exact_scores() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(levsketch(
        p,
        &["gen", "spiked", "--n", "500", "--d", "6", "-o", "a.bin"]
    )
    .status
    .success());
    let exact = floats(&json(p, &["exact", "a.bin"])["result"]["scores"]);
    let approx = floats(
        &json(
            p,
            &[
                "leverage", "a.bin", "--pi1", "full-rht", "--pi2", "identity",
            ],
        )["result"]["scores"],
    );
    for (x, y) in exact.iter().zip(&approx) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(levsketch(
        p,
        &["gen", "gaussian", "--n", "200", "--d", "3", "-o", "a.csv"]
    )
    .status
    .success());
    let out = Command::new(env!("CARGO_BIN_EXE_levsketch"))
        .args(["leverage", "a.csv"])
        .current_dir(p)
        .env("LEVSKETCH_SEED", "42")
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["seed"], 42);
    let explicit = json(p, &["leverage", "a.csv", "--seed", "42"]);
    assert_eq!(doc["result"], explicit["result"]);
}

#[test]
fn csv_output_and_bench_table() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(levsketch(
        p,
        &["gen", "gaussian", "--n", "100", "--d", "3", "-o", "a.csv"]
    )
    .status
    .success());
    let out = levsketch(p, &["exact", "a.csv", "--output-format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("index,score"));
    assert_eq!(text.lines().count(), 101);

    let out = levsketch(
        p,
        &["bench", "--n", "256,512", "--d", "4,8", "--trials", "2"],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,d,exact_ms,sketched_ms,max_rel_err,pass_fraction")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn output_file_and_underls() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(levsketch(
        p,
        &["gen", "gaussian", "--n", "4", "--d", "90", "-o", "a.csv"]
    )
    .status
    .success());
    std::fs::write(p.join("b.csv"), "1\n-2\n0.5\n3\n").unwrap();
    let out = levsketch(p, &["underls", "a.csv", "--rhs", "b.csv", "-o", "x.json"]);
    assert!(out.status.success() && out.stdout.is_empty());
    let doc: Value = serde_json::from_slice(&std::fs::read(p.join("x.json")).unwrap()).unwrap();
    assert_eq!(floats(&doc["result"]["x"]).len(), 90);
    assert_eq!(doc["params"]["r"], doc["result"]["r"]);
    assert_eq!(doc["params"]["beta"], 1.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // duplicated column: every sketch is rank deficient
    std::fs::write(
        p.join("dup.csv"),
        (0..40).map(|i| format!("{i},{i},1\n")).collect::<String>(),
    )
    .unwrap();
    let out = levsketch(p, &["leverage", "dup.csv", "--retries", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("3 attempts"));

    let out = levsketch(p, &["leverage", "dup.csv", "--truncate-rank"]);
    assert_eq!(out.status.code(), Some(0));

    std::fs::write(p.join("bad.csv"), "1,2\n3,x\n").unwrap();
    let out = levsketch(p, &["exact", "bad.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 2"));

    // usage errors are hard errors, not retry exhaustion
    let out = levsketch(p, &["cross", "dup.csv", "--kappa", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}
