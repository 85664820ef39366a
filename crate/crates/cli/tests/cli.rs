use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_magcurv")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(bin())
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn torus_find_orbit_certifies() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&configs().join("torus_find_orbit.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json(&tmp.path().join("find-orbit.json"));
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["passed"], true);
    let orbit = &doc["result"]["orbits"][0];
    let period = orbit["record"]["period"].as_f64().unwrap();
    assert!((period - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    assert_eq!(orbit["record"]["index"]["negative"], 1);
    assert_eq!(orbit["certification"]["passed"], true);
    for check in orbit["certification"]["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], true, "{check}");
    }
}

#[test]
fn sphere_curvature_column_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&configs().join("sphere_curvature.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(tmp.path().join("curvature.csv")).unwrap();
    let col = reader.headers().unwrap().iter().position(|h| h == "sec").unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let sec: f64 = rec.unwrap()[col].parse().unwrap();
        assert!((sec - 1.0).abs() < 1e-10, "sec = {sec}");
        rows += 1;
    }
    assert_eq!(rows, 1000);
}

#[test]
fn negative_tolerance_is_a_schema_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        r#"
[system]
builtin = "flat_torus"

[task]
command = "find-orbit"
k = 0.5
x0 = [0.0, 0.0]
v0 = [1.0, 0.0]
period = 6.0
tolerance = -1e-10
modes = 0
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run(&cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
    let err: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(err["error"]["kind"], "schema");
    let paths: Vec<&str> = err["error"]["issues"].as_array().unwrap().iter().map(|i| i["path"].as_str().unwrap()).collect();
    assert!(paths.contains(&"task.tolerance") && paths.contains(&"task.modes"), "{paths:?}");
}

#[test]
fn missing_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&tmp.path().join("nope.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("sphere_curvature.toml");
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run(&cfg, &a, &["--seed", "11"]);
    run(&cfg, &b, &["--seed", "11", "--format", "csv"]);
    run(&cfg, &c, &["--seed", "12"]);
    let read = |d: &Path| std::fs::read(d.join("curvature.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let j1 = tmp.path().join("j1");
    let j2 = tmp.path().join("j2");
    let torus = configs().join("torus_find_orbit.toml");
    run(&torus, &j1, &[]);
    Command::new(bin()).arg("--config").arg(&torus).arg("--out").arg(&j2).env("MAGCURV_THREADS", "1").output().unwrap();
    assert_eq!(std::fs::read(j1.join("find-orbit.json")).unwrap(), std::fs::read(j2.join("find-orbit.json")).unwrap());
}

#[test]
fn field_free_torus_reports_not_found() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "free.toml",
        r#"
[system]
builtin = "flat_torus"
b = 0.0

[task]
command = "find-orbit"
k = 0.5
x0 = [0.0, 0.0]
v0 = [1.0, 0.0]
period = 6.0
modes = 4
nodes = 64
"#,
    );
    let out = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&tmp.path().join("out/find-orbit.json"));
    assert_eq!(doc["passed"], false);
    let msg = doc["result"]["failure"]["message"].as_str().unwrap();
    assert!(msg.starts_with("closed orbit not found"), "{msg}");
}

#[test]
fn index_exports_spectrum_and_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "index.toml",
        r#"
[system]
builtin = "flat_torus"

[task]
command = "index"
k = 0.5
x0 = [0.0, 0.0]
v0 = [2.0, 0.0]
period = 6.0
modes = 6
nodes = 128
export_hessian = true
"#,
    );
    let out = run(&cfg, tmp.path(), &["--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let spectrum = std::fs::read_to_string(tmp.path().join("index.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 1 + 2 * 13 + 1);
    let problem = json(&tmp.path().join("index_problem.json"));
    let h = problem["hessian"].as_array().unwrap();
    assert_eq!(h.len(), 27);
    assert_eq!(problem["schema_version"], 1);
}

#[test]
fn gradient_method_finds_the_torus_orbit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "gradient.toml",
        r#"
[system]
builtin = "flat_torus"

[task]
command = "find-orbit"
method = "gradient"
k = 0.5
x0 = [1.0, 1.0]
radius = 0.5
period = 3.0
nodes = 128
modes = 4
"#,
    );
    let out = run(&cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json(&tmp.path().join("find-orbit.json"));
    let period = doc["result"]["orbits"][0]["record"]["period"].as_f64().unwrap();
    assert!((period - 2.0 * std::f64::consts::PI).abs() < 1e-6);
}

#[test]
fn hyperbolic_mane_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&configs().join("hyperbolic_mane.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&tmp.path().join("mane-bound.json"));
    assert!((doc["result"]["bound"].as_f64().unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn modulated_torus_report_passes_every_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&configs().join("modulated_torus_report.toml"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let mut reader = csv::Reader::from_path(tmp.path().join("report.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| &r[6] == "true" && &r[7] == "pass" && &r[2] == "1"));
}

#[test]
fn remaining_commands_run() {
    let tmp = tempfile::tempdir().unwrap();
    let texts = [
        (
            "integrate",
            "[system]\nbuiltin = \"round_sphere\"\n[task]\ncommand = \"integrate\"\nx0 = [0.5, 0.0]\nv0 = [0.0, 1.0]\nt_end = 20.0\nsamples = 50\n",
        ),
        (
            "transport",
            "[system]\nbuiltin = \"flat_torus\"\n[task]\ncommand = \"transport\"\nx0 = [0.0, 0.0]\nv0 = [1.0, 0.0]\nw0 = [0.0, 1.0]\nt_end = 6.283185307179586\n",
        ),
        ("scan-k0", "[system]\nbuiltin = \"flat_torus\"\nb = 1.0\n[task]\ncommand = \"scan-k0\"\nk_grid = [0.1, 1.0, 10.0]\nsamples = 64\n"),
        (
            "theorem-b",
            &std::fs::read_to_string(configs().join("surface_theorem_b.toml")).unwrap().replace("dir = \"out\"", "dir = \"ignored\""),
        ),
        (
            "bonnet-myers",
            "[system]\nbuiltin = \"flat_torus\"\n[task]\ncommand = \"bonnet-myers\"\nk = 0.5\nx0 = [0.0, 0.0]\nv0 = [1.0, 0.0]\nperiod = 6.0\nmodes = 4\nnodes = 128\n",
        ),
    ];
    for (name, text) in texts {
        let cfg = write_config(tmp.path(), &format!("{name}.toml"), text);
        let dir = tmp.path().join(name);
        let out = run(&cfg, &dir, &[]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
        let doc = json(&dir.join(format!("{name}.json")));
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["command"], name);
    }
    let drift = json(&tmp.path().join("transport/transport.json"))["result"]["norm_drift"].as_f64().unwrap();
    assert!(drift < 1e-8, "{drift}");
}

#[test]
fn example_configs_round_trip() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = magcurv_cli::load_config(&path).unwrap();
        let once = cfg.to_toml();
        let again = magcurv_cli::parse_config(&once).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        assert_eq!(again.to_toml(), once);
    }
}
