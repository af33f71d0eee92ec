use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn vdw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdw-otoc"))
        .args(args)
        .env_remove("VDW_OTOC_THREADS")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = vdw(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes `config` with its JSON patched by `patch`.
fn patched(dir: &Path, base: &str, patch: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = json(&configs().join(base));
    patch(&mut v);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

/// A coarse Lennard-Jones run that still has exponential states.
fn small_lj(dir: &Path) -> PathBuf {
    patched(dir, "rubidium_lj.json", |v| {
        v["grid"]["points"] = 700.into();
        v["otoc"]["t_points"] = 1500.into();
    })
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn harmonic_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("harmonic.json");
    run_ok(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"]);

    let spectrum = rows(&out.join("spectrum.csv"));
    assert_eq!(spectrum[0], ["n", "E_n", "r_nn", "r_c", "lambda_c", "lambda_sc"]);
    assert_eq!(spectrum.len(), 1 + 12);
    for (n, row) in spectrum[1..].iter().enumerate() {
        let e: f64 = row[1].parse().unwrap();
        assert!((e - (n as f64 + 0.5)).abs() < 1e-8, "E_{n} = {e}");
    }

    let reports = json(&out.join("sensitivity.json"));
    let manifest = json(&out.join("manifest.json"));
    let reported: Vec<u64> =
        manifest["otoc"]["reported_states"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert!(reported.len() >= 6);
    for r in reports.as_array().unwrap() {
        if reported.contains(&r["n"].as_u64().unwrap()) {
            assert_eq!(r["regime"], "regular", "{r}");
        } else {
            assert_eq!(r["regime"], "error");
            assert!(r["error"].as_str().unwrap().contains("truncation"));
        }
    }

    let otoc = rows(&out.join("otoc.csv"));
    assert_eq!(otoc[0], ["n", "t", "C"]);
    assert_eq!(otoc.len() - 1, reported.len() * 400);
    assert_eq!(manifest["solve"]["bound_states"], 12);
    assert_eq!(manifest["threads"], 1);
    assert_eq!(manifest["tool"], "vdw-otoc");
}

fn staged_matches_report(config: &Path) {
    let dir = tempfile::tempdir().unwrap();
    let staged = dir.path().join("staged");
    let full = dir.path().join("full");
    let cfg = config.to_str().unwrap();
    for stage in ["solve", "otoc", "fit"] {
        run_ok(&[stage, "--config", cfg, "--out", staged.to_str().unwrap(), "--threads", "1"]);
    }
    run_ok(&["report", "--config", cfg, "--out", full.to_str().unwrap(), "--threads", "1"]);
    for name in ["spectrum.csv", "elements.json", "otoc.csv", "sensitivity.json"] {
        let a = fs::read(staged.join(name)).unwrap();
        let b = fs::read(full.join(name)).unwrap();
        assert!(a == b, "{name} differs between staged and report runs");
    }
}

#[test]
fn staged_run_is_byte_identical_harmonic() {
    staged_matches_report(&configs().join("harmonic.json"));
}

#[test]
fn staged_run_is_byte_identical_lennard_jones() {
    let dir = tempfile::tempdir().unwrap();
    staged_matches_report(&small_lj(dir.path()));
}

#[test]
fn fit_sweep_touches_only_sensitivity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_lj(dir.path());
    let out = dir.path().join("out");
    let base = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"];
    run_ok(&[&["report"], &base[..]].concat());

    let snapshot = |name: &str| {
        let p = out.join(name);
        (fs::read(&p).unwrap(), fs::metadata(&p).unwrap().modified().unwrap())
    };
    let kept: Vec<_> = ["spectrum.csv", "elements.json", "otoc.csv"].iter().map(|n| snapshot(n)).collect();
    let before = json(&out.join("sensitivity.json"));

    run_ok(&[&["fit"], &base[..], &["--r2-min", "0.99"]].concat());
    let after_kept: Vec<_> = ["spectrum.csv", "elements.json", "otoc.csv"].iter().map(|n| snapshot(n)).collect();
    assert_eq!(kept, after_kept);
    let after = json(&out.join("sensitivity.json"));
    assert_ne!(before, after);
    for r in after.as_array().unwrap() {
        if let Some(w) = r["window"].as_object() {
            assert!(w["r_squared"].as_f64().unwrap() >= 0.99);
        }
    }
    assert_eq!(json(&out.join("manifest.json"))["config"]["fit"]["r2_min"], 0.99);

    // Same inputs, same bytes.
    let first = fs::read(out.join("sensitivity.json")).unwrap();
    run_ok(&[&["fit"], &base[..], &["--r2-min", "0.99"]].concat());
    assert_eq!(first, fs::read(out.join("sensitivity.json")).unwrap());
}

#[test]
fn negative_mass_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = patched(dir.path(), "harmonic.json", |v| v["reduced_mass_au"] = (-1.0).into());
    let out = vdw(&["report", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("reduced_mass_au"), "{}", stderr(&out));
}

#[test]
fn config_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = patched(dir.path(), "harmonic.json", |v| v["colour"] = "blue".into());
    let out = vdw(&["solve", "--config", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("colour"));

    let missing = dir.path().join("nope.json");
    assert_eq!(vdw(&["solve", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(vdw(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(vdw(&["report"]).status.code(), Some(2));

    let few = patched(dir.path(), "harmonic.json", |v| v["otoc"]["t_points"] = 10.into());
    let out = vdw(&["report", "--config", few.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("otoc.t_points"));
}

#[test]
fn missing_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("harmonic.json");
    let base = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];

    let res = vdw(&[&["otoc", "--no-recompute"], &base[..]].concat());
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("vdw-otoc solve"), "{}", stderr(&res));

    let res = vdw(&[&["fit"], &base[..]].concat());
    assert_eq!(res.status.code(), Some(2));

    // Without --no-recompute the solve stage is rerun.
    run_ok(&[&["otoc"], &base[..]].concat());
    assert!(out.join("spectrum.csv").exists() && out.join("otoc.csv").exists());
    assert!(!out.join("sensitivity.json").exists());
    run_ok(&[&["fit"], &base[..]].concat());

    // A later solve with another grid makes the otoc artifacts stale.
    let other = patched(dir.path(), "harmonic.json", |v| v["grid"]["points"] = 300.into());
    let res = vdw(&["fit", "--config", other.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let strict = patched(dir.path(), "harmonic.json", |v| v["otoc"]["convergence_bound"] = 1e-300.into());
    let res = vdw(&["report", "--config", strict.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", stderr(&res));
    let manifest = json(&out.join("manifest.json"));
    assert!(manifest["otoc"]["reported_states"].as_array().unwrap().is_empty());

    let unbound = patched(dir.path(), "rubidium_lj.json", |v| {
        v["potential"] = serde_json::json!({"kind": "lennard_jones", "c6": 1.0, "c12": 1.0});
        v["reduced_mass_au"] = 1.0.into();
        v["grid"]["points"] = 100.into();
    });
    let res = vdw(&["solve", "--config", unbound.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", stderr(&res));
}

#[test]
fn state_override_and_thread_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("harmonic.json");
    let res = Command::new(env!("CARGO_BIN_EXE_vdw-otoc"))
        .args(["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--state", "3", "1"])
        .env("VDW_OTOC_THREADS", "3")
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", stderr(&res));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["threads"], 3);
    assert_eq!(manifest["otoc"]["reported_states"], serde_json::json!([1, 3]));
    let otoc = rows(&out.join("otoc.csv"));
    assert_eq!(otoc.len() - 1, 2 * 400);
    let reports = json(&out.join("sensitivity.json"));
    assert_eq!(reports.as_array().unwrap().len(), 2);

    let res = vdw(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--state", "40"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("otoc.states"));
}

#[test]
fn json_only_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = patched(dir.path(), "harmonic.json", |v| v["output"]["formats"] = serde_json::json!(["json"]));
    run_ok(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(out.join("sensitivity.json").exists());
    assert!(!out.join("spectrum.csv").exists() && !out.join("otoc.csv").exists());
    assert_eq!(vdw(&["fit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(2));
}
