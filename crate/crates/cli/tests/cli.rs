use cns_cli::run::{CONVERGENCE_COLUMNS, ENERGY_COLUMNS};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

const SMALL: &str = r#"{"grid": {"N1": 8, "N2": 8, "Nz": 9}, "time": {"dt": 0.01, "T": 0.05}}"#;

fn cns(mode: &str, config: &str, out: &Path, sets: &[&str]) -> i32 {
    let cfg = out.with_extension("json");
    std::fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cns"));
    cmd.arg(mode).arg("--config").arg(&cfg).arg("--out").arg(out).env("CNS_THREADS", "1");
    for s in sets {
        cmd.args(["--set", s]);
    }
    cmd.output().unwrap().status.code().expect("exit code")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn header(path: PathBuf) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn gen_data_writes_compatible_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("data");
    assert_eq!(cns("gen-data", SMALL, &out, &[]), 0);
    for f in ["w0.cnsf", "h0.cnsf", "v0_1.cnsf", "v0_2.cnsf", "v0_3.cnsf", "eta0.cnss", "config.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let c = json(out.join("compatibility.json"));
    assert_eq!(c["pass"], Value::Bool(true));
    assert!(c["data_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_from_generated_data_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_eq!(cns("gen-data", SMALL, &data, &[]), 0);
    let out = tmp.path().join("run");
    let set = format!("data.dir=\"{}\"", data.display());
    assert_eq!(cns("simulate", SMALL, &out, &[&set]), 0);
    let s = json(out.join("summary.json"));
    assert_eq!(s["converged"], Value::Bool(true));
    assert_eq!(s["positive"], Value::Bool(true));
    assert_eq!(header(out.join("convergence.csv")), CONVERGENCE_COLUMNS);
    assert_eq!(header(out.join("energy.csv")), ENERGY_COLUMNS);
    assert!(out.join("fields").join("eta_000005.cnss").is_file());

    // Same seed without the directory gives the same run.
    let again = tmp.path().join("again");
    assert_eq!(cns("simulate", SMALL, &again, &[]), 0);
    let a = std::fs::read(out.join("convergence.csv")).unwrap();
    let b = std::fs::read(again.join("convergence.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_amplitude_converges_in_one_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("zero");
    assert_eq!(cns("simulate", SMALL, &out, &["data.amplitude=0"]), 0);
    let mut r = csv::Reader::from_path(out.join("convergence.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn config_errors_exit_two_with_error_document() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"grid": {"N1": 5, "N2": 8, "Nz": 9}}"#, "N1"),
        (r#"{"grid": {"N1": 8, "N2": 8, "Nz": 9}, "bogus": 1}"#, "bogus"),
        (r#"{"grid": {"N1": 8, "N2": 8, "Nz": 9}, "time": {"dt": 0.03, "T": 0.1}}"#, "whole number"),
        ("not json", "JSON"),
    ];
    for (i, (cfg, needle)) in cases.iter().enumerate() {
        let out = tmp.path().join(format!("bad{i}"));
        assert_eq!(cns("simulate", cfg, &out, &[]), 2, "{cfg}");
        let e = json(out.join("error.json"));
        assert_eq!(e["exit_code"], 2);
        assert_eq!(e["kind"], "config");
        assert!(e["message"].as_str().unwrap().contains(needle), "{e}");
    }
}

#[test]
fn oversized_data_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("big");
    assert_eq!(cns("simulate", SMALL, &out, &["picard.smallness_threshold=1e-3"]), 3);
    let e = json(out.join("error.json"));
    assert_eq!(e["kind"], "smallness");
    assert!(e["details"]["data_norm"].as_f64().unwrap() > 1e-3);
}

#[test]
fn exhausted_sweeps_exit_four_with_history() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("short");
    assert_eq!(cns("simulate", SMALL, &out, &["picard.max_sweeps=2"]), 4);
    let e = json(out.join("error.json"));
    assert_eq!(e["details"]["diff_history"].as_array().unwrap().len(), 2);
    assert!(out.join("convergence.csv").is_file());
}

#[test]
fn big_endian_data_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    assert_eq!(cns("gen-data", SMALL, &data, &[]), 0);
    let path = data.join("w0.cnsf");
    let bytes = std::fs::read(&path).unwrap();
    let split = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
    let mut swapped = bytes[..split].to_vec();
    for chunk in bytes[split..].chunks(8) {
        swapped.extend(chunk.iter().rev());
    }
    std::fs::write(&path, swapped).unwrap();
    let out = tmp.path().join("run");
    let set = format!("data.dir=\"{}\"", data.display());
    assert_eq!(cns("simulate", SMALL, &out, &[&set]), 1);
    let e = json(out.join("error.json"));
    assert!(e["message"].as_str().unwrap().contains("big-endian"), "{e}");
}

#[test]
fn mms_parabolic_space_study() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("mms");
    assert_eq!(cns("mms", SMALL, &out, &["mms.solver=\"parabolic\"", "mms.refinement=\"space\""]), 0);
    let mut r = csv::Reader::from_path(out.join("mms_parabolic_space.csv")).unwrap();
    let head = r.headers().unwrap().clone();
    let col = head.iter().position(|h| h == "order_w").expect("order_w column");
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][col].parse::<f64>().unwrap() >= 1.9);
}

#[test]
fn energy_report_relaxation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("energy");
    assert_eq!(cns("energy-report", SMALL, &out, &[]), 0);
    let s = json(out.join("energy_summary.json"));
    assert_eq!(s["stokes_energy_nonincreasing"], Value::Bool(true));
    assert!(s["max_divergence"].as_f64().unwrap() <= 1e-9);
    assert_eq!(header(out.join("energy.csv")), ENERGY_COLUMNS);
}

#[test]
fn verify_transform_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("verify");
    let cfg = r#"{"grid": {"N1": 16, "N2": 16, "Nz": 9}}"#;
    assert_eq!(cns("verify-transform", cfg, &out, &[]), 0);
    let s = json(out.join("verify_summary.json"));
    assert!(s["max_flat_residual"].as_f64().unwrap() <= 1e-10);
    assert!(s["min_order"].as_f64().unwrap() > 1.8);
    let h = header(out.join("residuals.csv"));
    assert_eq!(h[..4], ["term", "err_nz9", "err_nz17", "err_nz33"]);
}
