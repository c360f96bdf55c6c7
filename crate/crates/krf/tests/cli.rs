use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn krf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krf"))
        .args(args)
        .current_dir(cwd)
        .env_remove("KRF_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn small_flat_run(out_dir: &str) -> Value {
    json!({
        "name": "small-flat",
        "run": {
            "topology": "two_puncture",
            "grid": { "x_min": -3.0, "x_max": 3.0, "N": 32 },
            "ends": ["flat", "flat"],
            "initial": { "kind": "flat_perturbed", "level": 1.0, "noise": { "modes": 4, "amplitude": 0.2 } },
            "t_end": 0.5,
            "record_interval": 0.05
        },
        "output_dir": out_dir,
        "seed": 7
    })
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn predict_writes_the_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.json",
        &json!({ "manifold": "s2-1pt", "omega0": ["10"], "output_dir": "out" }),
    );
    let out = krf(&["predict", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&read(tmp.path().join("out/verdict.json"))).unwrap();
    assert_eq!(v["t_pred"]["exact"], "5*pi^-1");
    assert_eq!(v["classification"], "TypeIIGuaranteed");
}

#[test]
fn invalid_inputs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"manifold\": \"s2-1pt\",\n  \"omega0\": [\"10\"\n}").unwrap();
    let out = krf(&["predict", bad.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "parse location missing: {err}");

    let not_kahler = write_config(tmp.path(), "nk.json", &json!({ "manifold": "s2-1pt", "omega0": ["-1"] }));
    let out = krf(&["predict", not_kahler.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 2);

    let mismatch = write_config(tmp.path(), "mm.json", &json!({ "manifold": "s2xs2", "omega0": ["1"] }));
    assert_eq!(code(&krf(&["predict", mismatch.to_str().unwrap()], tmp.path())), 2);

    let unknown = write_config(tmp.path(), "uk.json", &json!({ "manifold": "s2-1pt", "omega0": ["1"], "colour": 3 }));
    assert_eq!(code(&krf(&["predict", unknown.to_str().unwrap()], tmp.path())), 2);

    assert_eq!(code(&krf(&["reproduce", "9.9"], tmp.path())), 2);
}

#[test]
fn missing_file_is_a_filesystem_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&krf(&["run", "absent.json"], tmp.path())), 5);
}

#[test]
fn reproduce_all_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let out = krf(&["reproduce", "all"], tmp.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    for id in ["9.2", "9.3a", "9.3b", "9.3c", "9.4-klt", "9.4-keq", "9.4-kgt"] {
        assert!(text.contains(&format!("{id}: ok")));
    }
}

#[test]
fn runs_are_byte_identical_for_equal_config_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a.json", &small_flat_run("a"));
    let b = write_config(tmp.path(), "b.json", &small_flat_run("b"));
    assert_eq!(code(&krf(&["run", a.to_str().unwrap()], tmp.path())), 0);
    assert_eq!(code(&krf(&["run", b.to_str().unwrap()], tmp.path())), 0);
    for file in ["series.csv", "indicator.csv", "verdict.json"] {
        assert_eq!(read(tmp.path().join("a").join(file)), read(tmp.path().join("b").join(file)), "{file}");
    }
    let header = read(tmp.path().join("a/series.csv"));
    assert!(header.starts_with("t,volume,sup_abs_K,cusp_c_fit,"));

    let mut other = small_flat_run("c");
    other["seed"] = json!(8);
    let c = write_config(tmp.path(), "c.json", &other);
    assert_eq!(code(&krf(&["run", c.to_str().unwrap()], tmp.path())), 0);
    assert_ne!(read(tmp.path().join("a/series.csv")), read(tmp.path().join("c/series.csv")));
}

#[test]
fn output_dir_can_be_overridden_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "p.json", &json!({ "manifold": "cstar", "omega0": ["1"], "output_dir": "ignored" }));
    let target = tmp.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_krf"))
        .args(["predict", cfg.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("KRF_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(target.join("verdict.json").exists());
    assert!(!tmp.path().join("ignored").exists());
}

#[test]
fn monitor_violation_exits_with_three_and_keeps_partial_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_flat_run("viol");
    cfg["run"]["scheme"] = json!("implicit_metric");
    cfg["run"]["initial"] = json!({ "kind": "flat_perturbed", "level": 1.0, "modes": [[1, 0.5], [3, 0.3]] });
    // A slack of 1e−15 is below roundoff in the monitors.
    cfg["run"]["tolerances"] = json!({ "solver": 1e-16, "newton": 1e-13 });
    let path = write_config(tmp.path(), "v.json", &cfg);
    let out = krf(&["run", path.to_str().unwrap()], tmp.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("monitor"));
    assert!(tmp.path().join("viol/series.csv").exists());
    assert!(tmp.path().join("viol/verdict.json").exists());
}

#[test]
fn integrator_failure_exits_with_four() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_flat_run("fail");
    cfg["run"]["scheme"] = json!("implicit_metric");
    cfg["run"]["tolerances"] = json!({ "solver": 1e-6, "newton": 1e-300 });
    let path = write_config(tmp.path(), "f.json", &cfg);
    assert_eq!(code(&krf(&["run", path.to_str().unwrap()], tmp.path())), 4);
}

#[test]
fn sweep_runs_every_point() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), "s.json", &small_flat_run("sweep"));
    let out = krf(
        &[
            "sweep",
            path.to_str().unwrap(),
            "--param",
            "run.grid.N=16,32",
            "--param",
            "seed=[1,2]",
            "--jobs",
            "2",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let listing: Value = serde_json::from_str(&read(tmp.path().join("sweep/sweep.json"))).unwrap();
    let points = listing.as_array().unwrap();
    assert_eq!(points.len(), 4);
    assert_eq!(points[1]["assignment"]["run.grid.N"], 16);
    assert_eq!(points[1]["assignment"]["seed"], 2);
    for i in 0..4 {
        assert!(tmp.path().join(format!("sweep/sweep-{i:03}/series.csv")).exists());
    }
}

#[test]
fn sweep_reports_the_worst_point() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_flat_run("sweep");
    cfg["run"]["scheme"] = json!("implicit_metric");
    let path = write_config(tmp.path(), "s.json", &cfg);
    let out = krf(
        &["sweep", path.to_str().unwrap(), "--param", "run.tolerances=[{\"solver\":1e-6},{\"solver\":1e-6,\"newton\":1e-300}]"],
        tmp.path(),
    );
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let listing: Value = serde_json::from_str(&read(tmp.path().join("sweep/sweep.json"))).unwrap();
    assert_eq!(listing[0]["exit_code"], 0);
    assert_eq!(listing[1]["exit_code"], 4);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = krf::ExperimentConfig::load(&path).unwrap();
        let run = cfg.run.as_ref().expect("shipped configs carry a run block");
        run.initial_metric(cfg.seed).unwrap();
        seen += 1;
    }
    assert!(seen >= 4);
}
