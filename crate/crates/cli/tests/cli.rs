use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sobolev_lab::spike::check_obj;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sobolevlab"));
    c.env_remove("SOBOLEVLAB_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn report(dir: &Path, suite: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(suite).join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

const SMALL: &str = r#"{
  "suite": "small",
  "seed": 3,
  "operations": [
    { "id": "half", "op": "cone_decay", "theta": 3.141592653589793, "mode": 1,
      "radii": [0.5, 1.0], "cells": 256, "exponent_tolerance": 0.05, "ratio_tolerance": 0.1 },
    { "id": "decay", "op": "density", "family_k": 1, "k": 2, "p": 2.0, "rate": 1.0,
      "sweep": [6, 8, 10, 12, 14], "min_trend": 0.9, "max_final_ratio": 0.1 },
    { "id": "eight", "op": "spike_profile", "count": 8, "eps_min": 0.008, "eta_bar": 0.05,
      "delta_ratio": 0.25, "r_in": 0.1, "r_out": 0.22, "certify_step": 0.002 },
    { "id": "flat", "op": "regularity",
      "chart": { "model": { "kind": "euclidean", "dim": 2 }, "half_width": 1.0 },
      "step": 0.03125, "p": [1.5, 2.0], "bumps": 2, "support": 0.9, "radius": 0.4, "outer": 0.8,
      "tolerance": 0.05 }
  ]
}"#;

#[test]
fn empty_operation_list_passes_with_zero_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "empty.json", r#"{"suite": "empty", "operations": []}"#);
    let out = tmp.path().join("out");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out, "empty");
    assert_eq!(r["summary"]["checks"], 0);
    assert_eq!(r["summary"]["pass"], true);
}

#[test]
fn corrupted_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"suite": "x", "operations": [{"id": "a""#);
    assert_eq!(code(&run(&["run", "--config", &cfg])), 2);
    let cfg = write_config(tmp.path(), "bad2.json", r#"{"suite": "x", "operations": [{"id": "a", "op": "warp_drive"}]}"#);
    assert_eq!(code(&run(&["run", "--config", &cfg])), 2);
    assert_eq!(code(&run(&["run", "--config", "/nonexistent/config.json"])), 2);
    assert_eq!(code(&run(&["run"])), 2);
    assert_eq!(code(&run(&["run", "--suite", "no-such-suite"])), 2);
    assert_eq!(code(&run(&["run", "--config", &cfg, "--tolerance-scale", "abc"])), 2);
}

#[test]
fn module_errors_are_recorded_and_the_suite_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mixed.json",
        r#"{"suite": "mixed", "operations": [
            { "id": "too-wide", "op": "cone_decay", "theta": 7.0, "mode": 1, "radii": [1.0], "cells": 64,
              "exponent_tolerance": 0.05, "ratio_tolerance": 0.1 },
            { "id": "balls", "op": "hyperbolic_ball_volume", "rho": [0.5], "tolerance": 0.005 }
        ]}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let r = report(&out, "mixed");
    let ops = r["operations"].as_array().unwrap();
    assert!(ops[0]["error"].as_str().unwrap().contains("2 pi"));
    assert_eq!(ops[1]["checks"][0]["pass"], true);
    assert_eq!(r["summary"]["errors"], 1);
}

#[test]
fn non_enforced_failures_do_not_change_the_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let op = r#"{ "id": "k", "op": "cone_volume", "tolerance": 0.01 ENFORCE }"#;
    for (enforce, expect) in [("", 1), (r#", "enforce": false"#, 0)] {
        let text = format!(r#"{{"suite": "k", "operations": [{}]}}"#, op.replace("ENFORCE", enforce));
        let cfg = write_config(tmp.path(), "k.json", &text);
        let o = run(&["run", "--config", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
        assert_eq!(code(&o), expect, "{text}");
    }
}

#[test]
fn identical_config_and_seed_give_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&run(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--jobs", "1"])), 0);
    assert_eq!(code(&run(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "3"])), 0);
    let (ra, rb) = (report(&a, "small"), report(&b, "small"));
    assert_eq!(ra["report_hash"], rb["report_hash"]);
    assert_eq!(ra["config_hash"], rb["config_hash"]);
    let mut files = 0;
    for e in std::fs::read_dir(a.join("small")).unwrap() {
        let name = e.unwrap().file_name();
        if name.to_str().unwrap().ends_with(".csv") || name.to_str().unwrap().ends_with(".obj") {
            let x = std::fs::read(a.join("small").join(&name)).unwrap();
            let y = std::fs::read(b.join("small").join(&name)).unwrap();
            assert_eq!(x, y, "{name:?}");
            files += 1;
        }
    }
    assert!(files >= 4);
    // a different seed is a different config
    let c = tmp.path().join("c");
    assert_eq!(code(&run(&["run", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "4"])), 0);
    assert_ne!(report(&c, "small")["config_hash"], ra["config_hash"]);
}

#[test]
fn describe_and_export_stored_objects() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", SMALL);
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(code(&run(&["run", "--config", &cfg, "--out", out_s])), 0);

    let d = run(&["--out", out_s, "describe", "eight.profile"]);
    let text = String::from_utf8(d.stdout).unwrap();
    assert!(text.contains("8 bumps") && text.contains("eta sum"), "{text}");

    let obj_path = tmp.path().join("eight.obj");
    let e = run(&["--out", out_s, "export", "small/eight.profile", "--format", "obj", "-o", obj_path.to_str().unwrap()]);
    assert_eq!(code(&e), 0);
    let stats = check_obj(&std::fs::read_to_string(&obj_path).unwrap()).unwrap();
    assert!(stats.is_manifold(), "{stats:?}");

    let csv = run(&["--out", out_s, "export", "decay.curve", "--format", "csv"]);
    let csv = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5, "{csv}");

    let missing = run(&["--out", out_s, "describe", "no-such-object"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("not found"));
    assert_eq!(code(&run(&["--out", out_s, "export", "half.curve", "--format", "obj"])), 2);
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let from_cfg = tmp.path().join("cfg");
    let text = format!(
        r#"{{"suite": "where", "output_dir": {:?}, "operations": []}}"#,
        from_cfg.to_str().unwrap()
    );
    let cfg = write_config(tmp.path(), "where.json", &text);
    assert_eq!(code(&run(&["run", "--config", &cfg])), 0);
    assert!(from_cfg.join("where/report.json").is_file());

    let env = tmp.path().join("env");
    let o = bin().args(["run", "--config", &cfg]).env("SOBOLEVLAB_OUT", &env).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(env.join("where/report.json").is_file());

    let flag = tmp.path().join("flag");
    let o = bin()
        .args(["run", "--config", &cfg, "--out", flag.to_str().unwrap()])
        .env("SOBOLEVLAB_OUT", &env)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(flag.join("where/report.json").is_file());
}

#[test]
fn bundled_lemma21_flat_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["run", "--suite", "lemma21-flat", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out, "lemma21-flat");
    assert_eq!(r["summary"]["failed_enforced"], 0);
    assert!(r["summary"]["checks"].as_u64().unwrap() >= 150);
}

#[test]
fn list_suites_names_every_bundled_suite() {
    let o = run(&["list-suites"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["lemma21-flat", "geometry", "transition", "spikes"] {
        assert!(text.contains(name), "{text}");
    }
}
