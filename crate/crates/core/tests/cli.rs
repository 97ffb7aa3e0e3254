mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::oracles::workspace_file;

fn semfield(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semfield"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a short-run config next to nothing else and returns its path.
fn tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let scene = workspace_file("scenes/two_material_cylinder.json");
    let text = format!(
        r#"{{
  "scene": {scene:?},
  "steps": 20,
  "snapshot_every": 10,
  "grad_steps_per_timestep": 1,
  "eval_points": 300,
  "mesh_resolution": 16,
  "export_snapshot_meshes": false{extra}
}}"#
    );
    let path = dir.join("cfg.json");
    fs::write(&path, text).unwrap();
    path
}

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let cfg = tiny_config(dir, "");
    let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--out", out];
    args.extend_from_slice(extra);
    semfield(dir, &args)
}

fn last_csv_pct(csv: &str) -> String {
    csv.lines().last().unwrap().split(',').nth(1).unwrap().to_owned()
}

#[test]
fn help_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = semfield(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("train"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(semfield(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(semfield(dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn missing_scene_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"scene": "/no/such/scene.json", "steps": 5}"#).unwrap();
    let o = semfield(dir.path(), &["train", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/scene.json"), "{}", stderr(&o));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), ",\n  \"learning_rte\": 0.1");
    let o = semfield(dir.path(), &["train", "--config", cfg.to_str().unwrap(), "--out", "o"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rte"), "{}", stderr(&o));
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("bad.sfck");
    fs::write(&ck, b"SFCK\x01garbage").unwrap();
    let scene = workspace_file("scenes/two_material_cylinder.json");
    let o = semfield(
        dir.path(),
        &["evaluate", "--checkpoint", ck.to_str().unwrap(), "--scene", scene.to_str().unwrap(), "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = semfield(dir.path(), &["export", "--checkpoint", ck.to_str().unwrap(), "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn truncated_and_empty_streams_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let o = semfield(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--out", "sim"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = fs::read(dir.path().join("sim/stream.sfts")).unwrap();
    let cut = dir.path().join("cut.sfts");
    fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
    let empty = dir.path().join("empty.sfts");
    fs::write(&empty, b"").unwrap();
    for s in [&cut, &empty] {
        let o = semfield(dir.path(), &["replay", "--config", cfg.to_str().unwrap(), "--stream", s.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    }
}

#[test]
fn training_is_reproducible_and_evaluate_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let a = train(dir.path(), "a", &[]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = train(dir.path(), "b", &["--quiet"]);
    let csv = fs::read_to_string(dir.path().join("a/report.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(dir.path().join("b/report.csv")).unwrap());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&b).lines().count(), 1);
    assert_eq!(stdout(&b).trim(), format!("final_matching_pct={}", last_csv_pct(&csv)));
    for f in ["config.json", "final.sfck", "final.ply", "mask_z.ppm"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }

    // the echoed config reproduces the run from another directory
    let echoed = dir.path().join("a/config.json");
    let elsewhere = tempfile::tempdir().unwrap();
    let o = semfield(elsewhere.path(), &["train", "--config", echoed.to_str().unwrap(), "--out", "c", "-q"]);
    assert_eq!(stdout(&o), stdout(&a));

    let ck = dir.path().join("a/final.sfck");
    let cfg = dir.path().join("cfg.json");
    let o = semfield(
        dir.path(),
        &["evaluate", "--config", cfg.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap(), "--out", "e", "-q"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), format!("matching_pct={}", last_csv_pct(&csv)));
}

#[test]
fn replay_of_a_dump_matches_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(semfield(dir.path(), &["simulate", "--config", cfg, "--out", "sim"]).status.code(), Some(0));
    let t = train(dir.path(), "t", &["-q"]);
    let r = semfield(dir.path(), &["replay", "--config", cfg, "--stream", "sim/stream.sfts", "--out", "r", "-q"]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    assert_eq!(stdout(&r), stdout(&t));
    assert_eq!(
        fs::read_to_string(dir.path().join("r/report.csv")).unwrap(),
        fs::read_to_string(dir.path().join("t/report.csv")).unwrap()
    );
}

#[test]
fn nothing_is_written_outside_out() {
    let dir = tempfile::tempdir().unwrap();
    tiny_config(dir.path(), "");
    let o = train(dir.path(), "only", &["-q"]);
    assert_eq!(o.status.code(), Some(0));
    let mut entries: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    entries.sort();
    assert_eq!(entries, ["cfg.json", "only"]);
}

#[test]
fn export_writes_a_mesh() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(train(dir.path(), "t", &["-q"]).status.code(), Some(0));
    let o = semfield(dir.path(), &["export", "--checkpoint", "t/final.sfck", "--resolution", "20", "--out", "x"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("x/mesh.ply")).unwrap();
    assert!(text.starts_with("ply\n"));
    for bad in [["--axis", "w"], ["--resolution", "12"]] {
        let mut args = vec!["export", "--checkpoint", "t/final.sfck", "--out", "x"];
        args.extend(bad);
        assert_eq!(semfield(dir.path(), &args).status.code(), Some(1));
    }
}
