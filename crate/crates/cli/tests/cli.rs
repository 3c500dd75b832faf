use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rb(args);
    assert!(
        out.status.success(),
        "rb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Like [`ok`] but also accepts exit code 4 (some solves hit the cap).
fn solved(args: &[&str]) -> String {
    let out = rb(args);
    assert!(
        matches!(out.status.code(), Some(0 | 4)),
        "rb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn gate_file(dir: &Path, args: &[&str]) -> PathBuf {
    let path = dir.join(format!("{}.json", args.join("_").replace('-', "")));
    let mut full = vec!["gate"];
    full.extend_from_slice(args);
    full.extend(["--out", path.to_str().unwrap()]);
    ok(&full);
    path
}

fn table(text: &str) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            header.iter().map(String::from).zip(rec.iter().map(String::from)).collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row.get(key).unwrap_or_else(|| panic!("missing column {key}")).parse().unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn gate_and_matches_table() {
    let v = json(&ok(&["gate", "and"]));
    assert_eq!(v["p_y"], serde_json::json!([0.75, 0.25]));
    for s in 0..2 {
        let ch = &v["sources"][s]["channel"];
        assert!((ch[0][0].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ch[1], serde_json::json!([0.0, 1.0]));
    }
}

#[test]
fn gate_parameters() {
    let copy = json(&ok(&["gate", "copy", "--epsilon", "0"]));
    assert_eq!(copy["y_labels"], serde_json::json!(["00", "11"]));
    let bsc = json(&ok(&["gate", "bsc4"]));
    let errors: Vec<f64> = (0..4)
        .map(|s| bsc["sources"][s]["channel"][0][1].as_f64().unwrap())
        .collect();
    assert_eq!(errors, vec![0.1, 0.1, 0.2, 0.5]);
    let custom = json(&ok(&["gate", "bsc4", "--errors", "0.3,0.4"]));
    assert_eq!(custom["sources"].as_array().unwrap().len(), 2);
    assert_eq!(rb(&["gate", "xor"]).status.code(), Some(2));
    assert_eq!(rb(&["gate", "and", "--epsilon", "0.1"]).status.code(), Some(2));
    assert_eq!(rb(&["gate", "copy", "--epsilon", "2"]).status.code(), Some(2));
}

#[test]
fn and_sweep_collapses_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let problem = gate_file(dir.path(), &["and"]);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        ok(&[
            "sweep",
            problem.to_str().unwrap(),
            "--betas",
            "0.05,1000,20",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let ma = fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap();
    assert_eq!(ma, fs::read_to_string(dir.path().join("b.csv.manifest.json")).unwrap());
    let m = json(&ma);
    assert_eq!(m["tool_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["input_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["config"]["beta_grid"].as_array().unwrap().len(), 20);
    assert_eq!(m["config"]["q_cardinality"], 5);

    let rows = table(&text);
    assert_eq!(rows.len(), 20);
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "beta,compression_bits,prediction_bits,objective_nats,converged,iterations,\
         pred_s1_bits,comp_s1_bits,pred_s2_bits,comp_s2_bits"
    );
    for row in &rows {
        assert!(num(row, "compression_bits").abs() < 5e-3);
        assert!((num(row, "prediction_bits") - 0.311).abs() < 5e-3);
    }
}

#[test]
fn unique_default_sweep_endpoint() {
    let dir = TempDir::new().unwrap();
    let problem = gate_file(dir.path(), &["unique"]);
    let rows = table(&ok(&["sweep", problem.to_str().unwrap()]));
    assert!(rows.len() >= 60);
    let betas: Vec<f64> = rows.iter().map(|r| num(r, "beta")).collect();
    assert!(betas.windows(2).all(|w| w[0] < w[1]));
    let last = rows.last().unwrap();
    assert!((num(last, "compression_bits") - 0.311).abs() < 5e-3);
    assert!((num(last, "prediction_bits") - 0.5).abs() < 5e-3);
}

#[test]
fn point_queries() {
    let dir = TempDir::new().unwrap();
    let copy0 = gate_file(dir.path(), &["copy", "--epsilon", "0"]);
    let v = json(&ok(&["point", copy0.to_str().unwrap(), "--rate", "0.01"]));
    assert!((v["prediction_bits"].as_f64().unwrap() - 1.0).abs() < 1e-2);

    let copy1 = gate_file(dir.path(), &["copy", "--epsilon", "1"]);
    let v = json(&ok(&["point", copy1.to_str().unwrap(), "--rate", "0.01"]));
    assert!(v["prediction_bits"].as_f64().unwrap() <= 0.02 + 1e-6);

    let and = gate_file(dir.path(), &["and"]);
    let v = json(&ok(&["point", and.to_str().unwrap(), "--rate", "0"]));
    assert!((v["prediction_bits"].as_f64().unwrap() - 0.311).abs() < 5e-3);

    assert_eq!(
        rb(&["point", and.to_str().unwrap(), "--rate", "-0.1"]).status.code(),
        Some(2)
    );
}

#[test]
fn point_from_cached_curve() {
    let dir = TempDir::new().unwrap();
    let problem = gate_file(dir.path(), &["unique"]);
    let curve = dir.path().join("u.csv");
    ok(&["sweep", problem.to_str().unwrap(), "--out", curve.to_str().unwrap()]);
    let cached = json(&ok(&["point", "--curve", curve.to_str().unwrap(), "--rate", "0.5"]));
    assert!((cached["prediction_bits"].as_f64().unwrap() - 0.5).abs() < 5e-3);
    let zero = json(&ok(&["point", "--curve", curve.to_str().unwrap(), "--rate", "0"]));
    assert!(zero["prediction_bits"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn exact_values() {
    let dir = TempDir::new().unwrap();
    for (args, bits) in [
        (vec!["and"], 0.311278124459),
        (vec!["unique"], 0.0),
        (vec!["copy", "--epsilon", "0.5"], 0.0),
    ] {
        let problem = gate_file(dir.path(), &args);
        let v = json(&ok(&["exact", problem.to_str().unwrap()]));
        assert!((v["blackwell_redundancy_bits"].as_f64().unwrap() - bits).abs() < 1e-9);
        assert!(v["witness"]["q_given_y"].is_array());
    }
    let spin = gate_file(dir.path(), &["threespin"]);
    let out = rb(&["exact", spin.to_str().unwrap(), "--budget", "3"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--rate 0"));
}

#[test]
fn decompose_columns() {
    let dir = TempDir::new().unwrap();
    let bsc = gate_file(dir.path(), &["bsc4"]);
    let rows = table(&solved(&["decompose", bsc.to_str().unwrap(), "--betas", "0.1,1000,30"]));
    for row in &rows {
        let (mut p, mut c) = (0.0, 0.0);
        for s in 1..=4 {
            p += num(row, &format!("wpred_s{s}_bits"));
            c += num(row, &format!("wcomp_s{s}_bits"));
            assert!(num(row, &format!("gap_s{s}_bits")) >= -1e-8);
        }
        assert!((p - num(row, "prediction_bits")).abs() < 1e-8);
        assert!((c - num(row, "compression_bits")).abs() < 1e-8);
    }
    let last = rows.last().unwrap();
    assert!(num(last, "wcomp_s3_bits") < 1e-3);
    assert!((num(last, "pred_s3_bits") - 0.278).abs() < 1e-3);

    let spin = gate_file(dir.path(), &["threespin"]);
    let rows = table(&solved(&["decompose", spin.to_str().unwrap(), "--betas", "0.05,0.1,3"]));
    for s in 1..=3 {
        assert!((num(&rows[0], &format!("pred_s{s}_bits")) - 1.0).abs() < 1e-2);
    }
}

#[test]
fn validation_errors_carry_pointers() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"p_y": [0.5, 0.5], "sources": [{"name": "A", "labels": ["0", "1"], "channel": [[0.5, 0.5], [0.5, "x"]]}]}"#,
    )
    .unwrap();
    let out = rb(&["sweep", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/sources/0/channel/1/1"));
    assert_eq!(rb(&["sweep", "/nonexistent.json"]).status.code(), Some(2));
    let and = gate_file(dir.path(), &["and"]);
    assert_eq!(
        rb(&["sweep", and.to_str().unwrap(), "--betas", "1,0.5,3"]).status.code(),
        Some(2)
    );
}

#[test]
fn nats_units_and_nonconvergence() {
    let dir = TempDir::new().unwrap();
    let problem = gate_file(dir.path(), &["unique"]);
    let out_path = dir.path().join("n.csv");
    let out = rb(&[
        "sweep",
        problem.to_str().unwrap(),
        "--units",
        "nats",
        "--max-iters",
        "1",
        "--restarts",
        "1",
        "--betas",
        "1,10,3",
        "--no-zero-rate",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("beta,compression_nats,prediction_nats,objective_nats"));
    assert!(table(&text).iter().any(|r| r["converged"] == "false"));
}
