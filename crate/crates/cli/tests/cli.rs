use std::path::Path;
use std::process::{Command, Output};

use chiralqed::model::sha256_hex;
use serde_json::Value;

fn chiralqed(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiralqed"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dispersion_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = chiralqed(&["dispersion", "--dk", "4.712", "--points", "16"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("dispersion.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("q_d,band,omega,v_g"));
    assert_eq!(lines.count(), 32);

    let manifest = read_json(&dir.path().join("manifest.json"));
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let name = f["name"].as_str().unwrap();
        let bytes = std::fs::read(dir.path().join(name)).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes), "{name}");
    }
    assert_eq!(manifest["parameters"]["params"]["delta_k_d"], 4.712);
}

#[test]
fn two_polariton_map_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["two-polariton-map", "--delta-range", "-1:1:11", "--dk-range", "0:6.283185307179586:13"];
    assert!(chiralqed(&args, a.path()).status.success());
    assert!(chiralqed(&args, b.path()).status.success());
    for name in ["elastic_probability.csv", "elastic_phase.csv", "decay.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let csv = std::fs::read_to_string(a.path().join("elastic_probability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 14);
    let summary = read_json(&a.path().join("summary.json"));
    // Δkd = 0, π and 2π columns are excluded.
    assert_eq!(summary["failed_cells"], 33);
}

#[test]
fn flags_override_config_document() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("job.json");
    std::fs::write(&config, r#"{"params": {"n_emitters": 5, "delta_k_d": 1.0}, "gate": {"sigma": 0.2}}"#).unwrap();
    let out_dir = dir.path().join("run");
    let out = chiralqed(
        &["fidelity", "--config", config.to_str().unwrap(), "--n", "3", "--half-width", "4"],
        &out_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&out_dir.join("manifest.json"));
    let params = &manifest["parameters"]["params"];
    assert_eq!(params["n_emitters"], 3);
    assert_eq!(params["delta_k_d"], 1.0);
    assert_eq!(manifest["parameters"]["gate"]["sigma"], 0.2);
    let summary = read_json(&out_dir.join("summary.json"));
    let f = summary["fidelity"].as_f64().unwrap();
    assert!(f > 0.0 && f <= 1.0);
}

#[test]
fn invalid_input_yields_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = chiralqed(&["fidelity", "--gamma-a", "-0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let record: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["error"]["kind"], "model");
    assert!(record["error"]["message"].as_str().unwrap().contains("gamma_a"));

    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{\n  \"params\": {\"n_emitters\": 5,}\n}").unwrap();
    let out = chiralqed(&["fidelity", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let record: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(record["error"]["kind"], "config");
    assert!(record["error"]["message"].as_str().unwrap().contains("line 2"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("job.json");
    std::fs::write(&config, r#"{"parms": {}}"#).unwrap();
    let out = chiralqed(&["s1", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parms"));
}

#[test]
fn sweep_table_covers_product_of_axes() {
    let dir = tempfile::tempdir().unwrap();
    let out = chiralqed(
        &["sweep", "--axis", "N=2,3", "--axis", "gamma=0,0.01", "--sigma", "0.2", "--half-width", "4"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,N,gamma_loss,sigma,fidelity,infidelity,overlap_ab_phase,error");
    assert_eq!(lines.len(), 5);
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["failed_points"], 0);
}

#[test]
fn s1_rows_are_unitary_at_zero_loss() {
    let dir = tempfile::tempdir().unwrap();
    assert!(chiralqed(&["s1", "--delta-range", "-2:2:9"], dir.path()).status.success());
    let csv = std::fs::read_to_string(dir.path().join("s1.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let col_a = v[1] * v[1] + v[2] * v[2] + v[5] * v[5] + v[6] * v[6];
        let col_b = v[3] * v[3] + v[4] * v[4] + v[7] * v[7] + v[8] * v[8];
        assert!((col_a - 1.0).abs() < 1e-12 && (col_b - 1.0).abs() < 1e-12, "{line}");
    }
}

#[test]
fn selftest_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = chiralqed(&["selftest", "--only", "1,2,10"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["criteria"].as_array().unwrap().len(), 3);
}

#[test]
fn propagate_writes_sector_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = chiralqed(
        &["propagate", "--n", "2", "--sigma", "0.3", "--half-width", "2", "--spacing", "0.1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for kind in ["density", "real", "imag"] {
        for pair in ["aa", "ab", "ba", "bb"] {
            let csv = std::fs::read_to_string(dir.path().join(format!("{kind}_{pair}.csv"))).unwrap();
            assert_eq!(csv.lines().count(), 42, "{kind}_{pair}");
        }
    }
    let summary = read_json(&dir.path().join("summary.json"));
    let norm_in = summary["input_norm"].as_f64().unwrap();
    let norm_out = summary["output_norm"].as_f64().unwrap();
    assert!((norm_in - 1.0).abs() < 1e-9);
    assert!((norm_out - norm_in).abs() < 0.05);
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["files"].as_array().unwrap().len(), 13);
}
