use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinchain"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn lorentzian(g: f64, n: usize, t_max: f64, points: usize) -> Value {
    json!({
        "chain": {"n_sites": n, "coupling": 1.0, "omega_eg": 1.0},
        "reservoirs": {"both": {"kind": "lorentzian", "g": g, "gamma": 0.02, "detuning": 0.0}},
        "initial": "first-site",
        "grid": {"t_max": t_max, "n_points": points},
        "output": {"stem": "run"}
    })
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|_| panic!("stdout: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn cross_check_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &lorentzian(0.3, 5, 100.0, 201));
    let o = bin(&["run", &cfg, "--backend", "cross-check"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dev: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.deviation.json")).unwrap()).unwrap();
    assert_eq!(dev["reference"], "pseudomode-oracle");
    assert!(dev["max_amplitude_deviation"].as_f64().unwrap() < 1e-6);
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,Re_c1,Im_c1,"));
    assert!(header.ends_with(",P_5,P_channel,P_total,fidelity"));
    assert_eq!(csv.lines().count(), 202);
    assert!(dir.path().join("run.oracle.csv").exists());
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(sidecar["metadata"]["provenance"], "laplace-inversion");
    assert_eq!(sidecar["metadata"]["error_estimates"].as_array().unwrap().len(), 201);
    assert!(sidecar["metadata"]["wall_time_s"].is_number());
}

#[test]
fn dimension_error_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &lorentzian(0.3, 1, 1.0, 2));
    let o = bin(&["run", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let diag = stderr_json(&o);
    assert_eq!(diag["status"], "config-error");
    assert_eq!(diag["kind"], "DimensionError");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = lorentzian(0.3, 3, 1.0, 2);
    v["grid"]["dt"] = json!(0.1);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin(&["validate", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["kind"], "SchemaError");
}

#[test]
fn validate_reports_extension_warning() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = lorentzian(0.3, 5, 1.0, 2);
    v["reservoirs"]["both"]["gamma"] = json!(0.65);
    v["reservoirs"]["both"]["detuning"] = json!(2.0);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin(&["validate", &cfg], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout_json(&o)["warnings"].as_array().unwrap().len(), 2);
}

#[test]
fn runs_are_bit_identical_and_sidecar_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut v = lorentzian(0.7, 4, 30.0, 61);
    v["reservoirs"] = json!({
        "left": {"kind": "lorentzian", "g": 0.7, "gamma": 0.1, "detuning": 0.2},
        "right": {"kind": "tabulated", "g": 0.4, "samples": [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]}
    });
    v["backend"] = json!("laplace");
    let cfg = write_config(dir.path(), "c.json", &v);
    assert!(bin(&["run", &cfg], &a).status.success());
    assert!(bin(&["run", &cfg], &b).status.success());
    let first = std::fs::read(a.join("run.csv")).unwrap();
    assert_eq!(first, std::fs::read(b.join("run.csv")).unwrap());

    let sidecar = a.join("run.json").to_string_lossy().into_owned();
    let c = dir.path().join("c");
    let o = bin(&["run", &sidecar], &c);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first, std::fs::read(c.join("run.csv")).unwrap());
}

#[test]
fn empty_sweep_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &lorentzian(0.3, 5, 1.0, 2));
    let o = bin(&["sweep", &cfg, "--axis", "reservoirs.both.g", "--values", ""], dir.path());
    assert!(o.status.success());
    assert!(stdout_json(&o)["rows"].as_array().unwrap().is_empty());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn unknown_axis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &lorentzian(0.3, 5, 1.0, 2));
    let o = bin(&["sweep", &cfg, "--axis", "chain.colour", "--values", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["kind"], "UnknownAxis");
}

#[test]
fn coupling_sweep_hinders_decay() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = lorentzian(1.0, 5, 1000.0, 3);
    v["initial"] = json!("center");
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin(&["sweep", &cfg, "--axis", "reservoirs.both.g", "--values", "1,2,3", "--jobs", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("run_sweep_g.csv")).unwrap();
    let p = column(&summary, "P_total_final");
    assert!(p[0] < p[1] && p[1] < p[2], "{p:?}");
    for g in ["1", "2", "3"] {
        assert!(dir.path().join(format!("run_g_{g}.csv")).exists());
    }
}

#[test]
fn ohmic_exponent_sweep_slows_decay() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "chain": {"n_sites": 6, "coupling": 1.0, "omega_eg": 1.0},
        "reservoirs": {"both": {"kind": "ohmic", "g": 0.3, "omega_c": 1.0, "s_param": 1.0}},
        "initial": "first-site",
        "grid": {"t_max": 60.0, "n_points": 61},
        "output": {"stem": "ohmic"}
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin(&["sweep", &cfg, "--axis", "reservoirs.both.s_param", "--values", "1:3:1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for s in ["1", "2", "3"] {
        let dev: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("ohmic_s_param_{s}.deviation.json"))).unwrap())
                .unwrap();
        assert_eq!(dev["reference"], "volterra-oracle");
        assert_eq!(dev["pass"], true);
    }
    let p = column(&std::fs::read_to_string(dir.path().join("ohmic_sweep_s_param.csv")).unwrap(), "P_total_final");
    assert!(p[0] < p[1] && p[1] < p[2], "{p:?}");
}

#[test]
fn sweep_records_point_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = lorentzian(0.3, 5, 5.0, 6);
    v["initial"] = json!("center");
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin(&["sweep", &cfg, "--axis", "chain.n_sites", "--values", "3,4,5"], dir.path());
    assert_eq!(o.status.code(), Some(6));
    let rows = stdout_json(&o)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["status"], "ok");
    assert_eq!(rows[1]["error"]["kind"], "ParamError");
    assert_eq!(rows[2]["status"], "ok");
}
