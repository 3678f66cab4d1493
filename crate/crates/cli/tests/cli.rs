use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vbwilson(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vbwilson")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok_json(args: &[&str], cwd: &Path) -> Value {
    let out = vbwilson(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn ok_text(args: &[&str], cwd: &Path) -> String {
    let out = vbwilson(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(args: &[&str], cwd: &Path) -> Value {
    let out = vbwilson(args, cwd);
    assert!(!out.status.success(), "{args:?} should fail");
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert!(err["error"]["message"].is_string());
    err
}

#[test]
fn verify_window_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["verify-window"], dir.path());
    assert!((v["d_over_pi"].as_f64().unwrap() - 5.657).abs() < 0.005);
    assert!(v["defect"].as_f64().unwrap() <= 1e-12);
    assert_eq!(v["ok"], true);
    error_json(&["verify-window", "--window", "gauss"], dir.path());
}

#[test]
fn dims_of_reference_presets() {
    let dir = tempfile::tempdir().unwrap();
    let all = ok_json(&["dims", "--all"], dir.path());
    let dim = |name: &str| all.as_array().unwrap().iter().find(|r| r["name"] == name).unwrap()["dim"].as_u64().unwrap();
    assert_eq!(dim("paper-5.1-sparse"), 2993);
    assert_eq!(dim("paper-5.2-extended"), 3101);
    assert_eq!(dim("paper-5.3-chirp"), 2893);

    let v = ok_json(&["dims", "--interval", "0:3", "--bandwidths", "1:5,5,5,5,5"], dir.path());
    assert_eq!(v["dim"], 27);
    let v = ok_json(&["dims", "--preset", "paper-5.1-sparse", "--mode", "overlapping"], dir.path());
    assert_eq!(v["dim"], v["overlapping_dim"]);
}

#[test]
fn gen_samples_counts_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["gen-samples", "--preset", "paper-5.1-sparse", "-o", "s.csv", "--report", "r.json"], dir.path());
    assert_eq!(v["points"], 12121);
    assert!((v["q"].as_f64().unwrap() - 4.05).abs() < 0.01);
    assert_eq!(v["all_pass"], true);
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,j,x"));
    assert_eq!(csv.lines().count(), 12122);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["groups"].as_array().unwrap().len(), 12);

    let v = ok_json(&["gen-samples", "--preset", "paper-5.1-sparse", "--sampling", "rho", "--rho", "1", "-o", "s.csv"], dir.path());
    assert_eq!(v["points"], 4295);
    let v = ok_json(&["gen-samples", "--preset", "paper-5.1-sparse", "--coverage", "2:3", "-o", "s.csv"], dir.path());
    assert_eq!(v["coverage"], serde_json::json!([2, 3]));
}

#[test]
fn run_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let summary = ok_json(&["run", "--preset", "small-sparse", "-o", "a"], dir.path());
    assert!(summary["e2"].as_f64().unwrap() <= 1e-10);
    let a = dir.path().join("a");
    for f in ["samples.csv", "coefficients.csv", "reconstruction.csv", "errors.json", "report.json"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let samples = fs::read_to_string(a.join("samples.csv")).unwrap().lines().count() - 1;
    let coeffs = fs::read_to_string(a.join("coefficients.csv")).unwrap().lines().count() - 1;
    assert_eq!(report["points"].as_u64().unwrap() as usize, samples);
    assert_eq!(report["dim"].as_u64().unwrap() as usize, coeffs);
    assert_eq!(report["q"].as_f64().unwrap(), samples as f64 / coeffs as f64);
    assert_eq!(report["solver"]["method"], "lsq");
    let errors: Value = serde_json::from_str(&fs::read_to_string(a.join("errors.json")).unwrap()).unwrap();
    assert_eq!(errors, report["errors"]);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(&["run", "--preset", "small-full", "-o", "a"], dir.path());
    ok_json(&["run", "--preset", "small-full", "-o", "b"], dir.path());
    for f in ["samples.csv", "coefficients.csv", "reconstruction.csv", "errors.json", "report.json"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ok_text(&["config", "--preset", "small-sparse", "--solver", "adaptive", "--sampling", "rho", "--rho", "8"], dir.path());
    fs::write(dir.path().join("cfg.json"), &cfg).unwrap();
    let parsed: Value = serde_json::from_str(&cfg).unwrap();
    assert_eq!(parsed["solver"]["method"], "adaptive");

    let summary = ok_json(&["run", "cfg.json", "-o", "out", "--iterations", "400"], dir.path());
    assert!(summary["e2"].as_f64().unwrap() <= 1e-8, "{summary}");
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"]["method"], "adaptive");
    assert!(report["solver"]["residual_history"].as_array().unwrap().len() > 1);
}

#[test]
fn reconstruct_from_external_samples() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok_text(&["gen-samples", "--preset", "small-sparse", "--values"], dir.path());
    assert!(csv.starts_with("k,j,x,value\n"));
    fs::write(dir.path().join("s.csv"), csv).unwrap();
    ok_json(&["reconstruct", "--preset", "small-sparse", "--samples", "s.csv", "-o", "rec"], dir.path());
    ok_json(&["run", "--preset", "small-sparse", "-o", "ref"], dir.path());
    let read = |p: &str| -> Vec<f64> {
        fs::read_to_string(dir.path().join(p))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect()
    };
    let a = read("rec/coefficients.csv");
    let b = read("ref/coefficients.csv");
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12);
    }

    fs::write(dir.path().join("bad.csv"), "k,j,x,value\n0,0,0.9,1\n").unwrap();
    error_json(&["reconstruct", "--preset", "small-sparse", "--samples", "bad.csv", "-o", "x"], dir.path());
}

#[test]
fn rho_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok_text(&["rho-sweep", "--preset", "small-sparse", "--rhos", "1"], dir.path());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "rho,points,q,e2,einf,status");
    let e2: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!(e2 <= 1e-10);

    let csv = ok_text(&["rho-sweep", "--preset", "small-sparse", "--rho-range", "1:1.5:0.1"], dir.path());
    let rhos: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rhos, ["1.0", "1.1", "1.2", "1.3", "1.4", "1.5"]);
}

#[test]
fn signal_and_projection_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok_text(&["gen-signal", "--preset", "small-chirp", "--step", "0.01"], dir.path());
    assert_eq!(csv.lines().next(), Some("x,value"));
    assert_eq!(csv.lines().count(), 301);

    ok_text(&["gen-signal", "--preset", "small-sparse", "-o", "f.csv", "--coefficients", "c.csv"], dir.path());
    assert!(fs::read_to_string(dir.path().join("c.csv")).unwrap().starts_with("i,n,l,value\n"));
    error_json(&["gen-signal", "--preset", "small-chirp", "--coefficients", "c.csv"], dir.path());

    let v = ok_json(&["project", "--preset", "small-chirp", "-o", "p"], dir.path());
    let e2 = v["errors"]["e2"].as_f64().unwrap();
    assert!(e2 > 0.0 && e2 < 1e-1);
    assert!(dir.path().join("p/coefficients.csv").is_file());
}

#[test]
fn gw_signal_flags() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok_text(
        &["gen-signal", "--preset", "small-sparse", "--signal", "gw", "--t0", "5", "--omega", "20", "--step", "0.5"],
        dir.path(),
    );
    assert_eq!(csv.lines().count(), 7);
    error_json(&["gen-signal", "--preset", "small-sparse", "--signal", "gw", "--t0", "3"], dir.path());
    error_json(&["gen-signal", "--preset", "small-sparse", "--signal", "gw"], dir.path());
}

#[test]
fn spectrogram_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok_text(&["spectrogram", "--preset", "small-chirp", "--max-freq", "50", "--hop", "0.1"], dir.path());
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,f,mag"));
    assert!(lines.all(|l| l.split(',').count() == 3));
    error_json(&["spectrogram", "--preset", "small-chirp", "--fft-size", "1000"], dir.path());
}

#[test]
fn density_report_holds_on_gap_set() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["density-report", "--preset", "paper-5.1-sparse", "--radii", "3", "--kernel-out", "k.csv"], dir.path());
    let row = &v["densities"][0];
    assert_eq!(row["holds"], true);
    assert!(row["lower_density"].as_f64().unwrap() >= row["necessary"].as_f64().unwrap());
    assert_eq!(v["necessary_count"], 2993);
    let k = fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert_eq!(k.lines().next(), Some("x,k"));
}

#[test]
fn failures_emit_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let e = error_json(&["run", "--preset", "nope"], dir.path());
    assert_eq!(e["error"]["kind"], "UnknownPreset");
    let e = error_json(&["run", "--preset", "small-sparse", "--margin", "-1"], dir.path());
    assert_eq!(e["error"]["kind"], "InvalidParameter");
    error_json(&["run", "--preset", "small-sparse", "--sampling", "rho"], dir.path());
    error_json(&["run", "--preset", "small-sparse", "--omega0", "3"], dir.path());
    error_json(&["dims"], dir.path());
    fs::write(dir.path().join("bad.json"), "{\"space\": 1}").unwrap();
    let e = error_json(&["run", "bad.json"], dir.path());
    assert_eq!(e["error"]["kind"], "Config");
}

#[test]
fn presets_listed() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok_json(&["presets"], dir.path());
    assert!(v.as_array().unwrap().iter().any(|p| p == "paper-5.3-chirp"));
}
