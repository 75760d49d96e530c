use std::fs;
use std::path::Path;

use psbr_cli::catalog;
use psbr_cli::cli::main_with_args;
use psbr_cli::config::to_json;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("psbr").chain(args.iter().copied()))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small(name: &str) -> String {
    let mut cfg = catalog::by_name(name).unwrap();
    cfg.propagation.n_times = 50;
    to_json(&cfg)
}

#[test]
fn simulate_writes_trajectory_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig2.json");
    fs::write(&cfg, small("fig2")).unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", "--config", path(&cfg), "--out", path(&out)]), 0);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with(psbr_cli::run::TRAJECTORY_HEADER));
    assert_eq!(csv.lines().count(), 51);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["name"], "fig2");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn sweep_output_does_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig3.json");
    fs::write(&cfg, to_json(&catalog::fig3())).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&["sweep", "--config", path(&cfg), "--out", path(&a), "--jobs", "1"]), 0);
    assert_eq!(run(&["sweep", "--config", path(&cfg), "--out", path(&b), "--jobs", "8"]), 0);
    for f in ["sweep.csv", "sweep.json", "manifest.json", "trajectories/point_004.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    assert_eq!(run(&["simulate", "--preset", "nope", "--out", path(&out)]), 1);

    let bad = dir.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&small("fig2")).unwrap();
    v["propagation"]["t_end"] = serde_json::json!(-1.0);
    fs::write(&bad, v.to_string()).unwrap();
    assert_eq!(run(&["simulate", "--config", path(&bad), "--out", path(&out)]), 1);

    fs::write(&bad, "{ \"name\": ").unwrap();
    assert_eq!(run(&["simulate", "--config", path(&bad), "--out", path(&out)]), 1);

    assert_eq!(run(&["frobnicate"]), 1);
    assert!(!out.exists());
}

#[test]
fn missing_files_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["simulate", "--config", path(&missing), "--out", path(dir.path())]), 3);
}

#[test]
fn sweep_without_sweep_section_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig2.json");
    fs::write(&cfg, small("fig2")).unwrap();
    assert_eq!(run(&["sweep", "--config", path(&cfg), "--out", path(dir.path())]), 1);
}

#[test]
fn ubiquity_accepts_bare_and_labeled_dipoles() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("d.json");
    fs::write(&f, r#"[[1, 0, 0], {"label": "y", "components": [0, 1, 0]}, [0, 0, 2]]"#).unwrap();
    assert_eq!(run(&["ubiquity", "--dipoles", path(&f)]), 0);
    fs::write(&f, "[[0, 0, 0]]").unwrap();
    assert_eq!(run(&["ubiquity", "--dipoles", path(&f)]), 1);
}

#[test]
fn presets_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["presets", "--write", path(dir.path())]), 0);
    for name in psbr::presets::NAMES {
        let cfg = psbr_cli::load_config(&dir.path().join(format!("{name}.json"))).unwrap();
        assert_eq!(cfg, catalog::by_name(name).unwrap());
    }
}

#[test]
fn field_needs_a_field_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig2.json");
    fs::write(&cfg, small("fig2")).unwrap();
    assert_eq!(run(&["field", "--config", path(&cfg)]), 1);

    let mut v: serde_json::Value = serde_json::from_str(&small("fig2")).unwrap();
    v["field"] = serde_json::json!({"tau_c": 1.0, "n_realizations": 200, "tau_p": [0.1], "separations": [0.0, 1.0]});
    fs::write(&cfg, v.to_string()).unwrap();
    let out = dir.path().join("field");
    assert_eq!(run(&["field", "--config", path(&cfg), "--out", path(&out)]), 0);
    let vis = fs::read_to_string(out.join("field_visibility.csv")).unwrap();
    assert_eq!(vis.lines().count(), 3);
}

#[test]
fn help_exits_with_zero() {
    assert_eq!(run(&["--help"]), 0);
}
