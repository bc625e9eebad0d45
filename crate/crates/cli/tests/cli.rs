use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn twoway(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoway"))
        .args(args)
        .env("TWOWAY_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn design(dir: &Path, snr1: &str, snr2: &str, n: &str) -> PathBuf {
    let out = dir.join(format!("design_{n}.json"));
    let o = twoway(&[
        "design", "--snr1-db", snr1, "--snr2-db", snr2, "--n", n, "--k1", "1", "--k2", "1", "--eta2-grid", "12",
        "--seed", "4", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("scheme,k1,k2,n,snr1_db,snr2_db,ber1,ber2,bler1,bler2,sum_ber,sum_bler,trials,seed")
    );
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn missing_out_is_a_usage_error() {
    let o = twoway(&["design", "--snr1-db", "1", "--snr2-db", "20", "--n", "3", "--k1", "1", "--k2", "1"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn single_use_design_is_plain_scaling() {
    let dir = scratch("n1");
    let path = design(&dir, "3", "6", "1");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let s1 = doc["sigma1_sq"].as_f64().unwrap();
    let s2 = doc["sigma2_sq"].as_f64().unwrap();
    assert!((doc["power1"].as_f64().unwrap() - doc["eta1"].as_f64().unwrap() * s1).abs() < 1e-9);
    assert!((doc["power2"].as_f64().unwrap() - doc["eta2"].as_f64().unwrap() * s2).abs() < 1e-9);
    assert_eq!(doc["f1_rowmajor"], serde_json::json!([0.0]));
    assert!(doc["meta"]["tool_version"].as_str().unwrap().starts_with("gtwc-core"));
}

#[test]
fn three_use_design_sends_user2_message_last() {
    let dir = scratch("n3");
    let out = dir.join("d.json");
    let o = twoway(&[
        "design", "--snr1-db", "1", "--snr2-db", "20", "--n", "3", "--k1", "1", "--k2", "1", "--out", s(&out),
    ]);
    assert!(o.status.success());
    let line: Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["eta1", "eta2", "alpha", "power1", "power2", "predicted_sum_bler"] {
        assert!(line[key].is_number(), "{key}");
    }
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let g2: Vec<f64> = doc["g2"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(&g2[..2], &[0.0, 0.0]);
    assert!(g2[2] > 0.0);
}

#[test]
fn noiseless_simulation_has_no_errors() {
    let dir = scratch("noiseless");
    let d = design(&dir, "1", "20", "3");
    let csv = dir.join("r.csv");
    let o = twoway(&["simulate", "--design", s(&d), "--trials", "20000", "--noiseless", "--out", s(&csv)]);
    assert!(o.status.success());
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1);
    for col in 6..12 {
        assert_eq!(rows[0][col].parse::<f64>().unwrap(), 0.0);
    }
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("r.csv.meta.json")).unwrap()).unwrap();
    assert!(meta["meta"]["tool_version"].is_string());
}

#[test]
fn same_seed_gives_identical_rows() {
    let dir = scratch("repeat");
    let d = design(&dir, "1", "20", "3");
    let csv = dir.join("r.csv");
    for _ in 0..2 {
        let o = twoway(&[
            "simulate", "--design", s(&d), "--trials", "50000", "--seed", "9", "--early-stop", "0", "--out", s(&csv),
        ]);
        assert!(o.status.success());
    }
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn malformed_design_is_a_data_error() {
    let dir = scratch("malformed");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{\"n\": 3, \"g1\": [1.0]}").unwrap();
    let o = twoway(&["simulate", "--design", s(&bad), "--trials", "10", "--out", s(&dir.join("r.csv"))]);
    assert_eq!(o.status.code(), Some(65));
}

#[test]
fn oversized_oracle_is_refused() {
    let o = twoway(&["oracle", "--snr1-db", "0", "--snr2-db", "10", "--n", "5", "--eta1", "10", "--eta2", "10"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn empty_sweep_range_is_a_usage_error() {
    let dir = scratch("empty");
    let o = twoway(&[
        "sweep", "--snr1-db", "1", "--snr2-from", "10", "--snr2-to", "5", "--n", "3", "--k", "1", "--out",
        s(&dir.join("r.csv")),
    ]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn repetition_sweep_is_flat_in_snr2() {
    let dir = scratch("rep");
    let csv = dir.join("r.csv");
    let curves = dir.join("curves");
    let o = twoway(&[
        "sweep", "--snr1-db", "1", "--snr2-from", "10", "--snr2-to", "20", "--snr2-step", "5", "--schemes",
        "repetition", "--n", "3", "--k", "1", "--trials", "200000", "--early-stop", "0", "--out", s(&csv),
        "--emit-curves", s(&curves),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sums: Vec<f64> = data_rows(&csv).iter().map(|r| r[11].parse().unwrap()).collect();
    assert_eq!(sums.len(), 3);
    // Q(√(3·10^0.1)) ≈ 0.026 with 2e5 trials: standard error about 3.6e-4.
    let mean = sums.iter().sum::<f64>() / 3.0;
    assert!(sums.iter().all(|v| (v - mean).abs() < 2e-3), "{sums:?}");
    let text = std::fs::read_to_string(curves.join("repetition.dat")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn single_point_sweep_matches_simulate() {
    let dir = scratch("single");
    let d = design(&dir, "1", "20", "3");
    let a = dir.join("simulate.csv");
    let o = twoway(&["simulate", "--design", s(&d), "--trials", "30000", "--seed", "4", "--out", s(&a)]);
    assert!(o.status.success());
    let b = dir.join("sweep.csv");
    let o = twoway(&[
        "sweep", "--snr1-db", "1", "--snr2-from", "20", "--snr2-to", "20", "--n", "3", "--k", "1", "--eta2-grid",
        "12", "--trials", "30000", "--seed", "4", "--out", s(&b),
    ]);
    assert!(o.status.success());
    // Both runs design with seed 4, so the rows agree exactly.
    let (ra, rb) = (data_rows(&a), data_rows(&b));
    assert_eq!(ra.len(), 1);
    assert_eq!(ra, rb);
}

#[test]
fn linear_sweep_improves_with_snr2() {
    let dir = scratch("linear");
    let csv = dir.join("r.csv");
    let o = twoway(&[
        "sweep", "--snr1-db", "1", "--snr2-from", "5", "--snr2-to", "25", "--snr2-step", "10", "--n", "3", "--k",
        "1", "--eta2-grid", "12", "--trials", "200000", "--early-stop", "0", "--out", s(&csv),
    ]);
    assert!(o.status.success());
    let sums: Vec<f64> = data_rows(&csv).iter().map(|r| r[11].parse().unwrap()).collect();
    assert!(sums.windows(2).all(|w| w[1] < w[0]), "{sums:?}");
}
