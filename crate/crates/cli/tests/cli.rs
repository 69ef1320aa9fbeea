use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agrivolt::sweep::SweepGrid;
use serde_json::Value;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn agrivolt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agrivolt")).args(args).output().unwrap()
}

fn high_value() -> String {
    bundled("khanewal_high_value.toml").to_string_lossy().into_owned()
}

fn machine_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn feasibility_output_is_deterministic() {
    let hv = high_value();
    let args = ["feasibility", "--scenario", &hv, "--format", "machine"];
    let a = agrivolt(&args);
    let b = agrivolt(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_files_are_byte_identical_across_runs() {
    let hv = high_value();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = d.path().to_string_lossy().into_owned();
        let o = agrivolt(&["sweep", "--scenario", &hv, "--ph", "2,3", "--ml", "10,20", "--out", &out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["rho.csv", "delta_fit_th.csv", "psi.csv", "y_par.csv", "y_pv.csv", "boundary.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn single_cell_sweep_matches_feasibility() {
    let hv = high_value();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let o = agrivolt(&["sweep", "--scenario", &hv, "--ph", "3", "--ml", "20", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let f = machine_json(&agrivolt(&["feasibility", "--scenario", &hv, "--ph", "3", "--ml", "20", "--format", "machine"]));
    let result = &f["result"];
    for (file, key) in [("rho.csv", "rho"), ("delta_fit_th.csv", "delta_fit_th"), ("y_pv.csv", "y_pv"), ("y_par.csv", "y_par")] {
        let grid = SweepGrid::read(&dir.path().join(file)).unwrap();
        assert_eq!(grid.ph_axis, vec![3.0]);
        assert_eq!(grid.ml_axis, vec![20.0]);
        assert_eq!(grid.values[0][0], result[key].as_f64().unwrap(), "{key}");
    }
}

#[test]
fn high_value_ew_needs_a_tariff_premium() {
    let hv = high_value();
    let f = machine_json(&agrivolt(&[
        "feasibility", "--scenario", &hv, "--orientation", "ew_vertical", "--ph", "3", "--ml", "20", "--format", "machine",
    ]));
    assert_eq!(f["result"]["feasible_vs_gmpv"], Value::Bool(false));
    assert!(f["result"]["delta_fit_th"].as_f64().unwrap() > 0.0);
}

#[test]
fn av_identical_to_gmpv_is_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("twin.toml");
    std::fs::write(
        &path,
        r#"
rotation = "fallow"
[weather]
clearsky = true
[av]
orientation = "ns_tilted"
pitch_over_height = 2.0
clearance_over_height = 0.5
tilt = 30.0
[econ]
kappa = 1.0
"#,
    )
    .unwrap();
    let f = machine_json(&agrivolt(&["feasibility", "--scenario", path.to_str().unwrap(), "--format", "machine"]));
    assert_eq!(f["result"]["rho"].as_f64(), Some(1.0));
    assert_eq!(f["result"]["feasible_vs_gmpv"], Value::Bool(true));
    assert_eq!(f["result"]["delta_fit_th"].as_f64(), Some(0.0));
}

#[test]
fn exit_codes_distinguish_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "rotation = \"wheat\"\nunknown_key = 1\n").unwrap();
    assert_eq!(agrivolt(&["feasibility", "--scenario", bad.to_str().unwrap()]).status.code(), Some(1));

    let hv = high_value();
    assert_eq!(agrivolt(&["feasibility", "--scenario", &hv, "--ph", "0.5"]).status.code(), Some(1));
    assert_eq!(agrivolt(&["sweep", "--scenario", &hv]).status.code(), Some(1));
    assert_eq!(agrivolt(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(agrivolt(&["--threads", "0", "feasibility", "--scenario", &hv]).status.code(), Some(1));
    assert_eq!(agrivolt(&["feasibility", "--scenario", &hv]).status.code(), Some(0));
}

#[test]
fn out_flag_writes_the_report() {
    let hv = high_value();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let o = agrivolt(&["feasibility", "--scenario", &hv, "--format", "machine", "--out", &out]);
    let written: Value = serde_json::from_slice(&std::fs::read(dir.path().join("feasibility.json")).unwrap()).unwrap();
    assert_eq!(written, machine_json(&o));
}

#[test]
fn fit_threshold_table_has_one_column_per_scenario() {
    let hv = high_value();
    let lv = bundled("khanewal_low_value.toml").to_string_lossy().into_owned();
    let o = agrivolt(&[
        "fit-threshold", "--scenario", &hv, "--scenario", &lv, "--orientation", "ns_tilted,ew_vertical", "--ph", "2,3", "--ml", "10",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .filter(|w| w.len() == 6 && w[0] == "10")
        .collect();
    assert_eq!(rows.len(), 2, "{text}");
    for row in rows {
        for v in &row[2..] {
            assert!(v.parse::<f64>().unwrap() >= 0.0);
        }
    }
}

#[test]
fn optimal_tilt_reports_a_tilt_in_range() {
    let hv = high_value();
    let f = machine_json(&agrivolt(&["optimal-tilt", "--scenario", &hv, "--format", "machine"]));
    let tilt = f["optimal_tilt"].as_f64().unwrap();
    assert!((0.5..=60.0).contains(&tilt), "{f}");
    assert!(f["annual_yield"].as_f64().unwrap() >= f["reference_yield"].as_f64().unwrap());
}

#[test]
fn validate_passes_and_detects_a_perturbed_model() {
    let ok = agrivolt(&["validate", "--geometries", "4", "--scenarios", "50"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = agrivolt(&["validate", "--rays", "1000", "--geometries", "2", "--scenarios", "50", "--perturb-kappa", "0.05"]);
    assert_eq!(bad.status.code(), Some(2));
}
