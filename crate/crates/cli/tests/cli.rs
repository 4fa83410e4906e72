use assert_cmd::Command;
use predicates::prelude::*;
use tempfile::tempdir;

fn spseg() -> Command {
    Command::cargo_bin("spseg").unwrap()
}

fn write_config(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        r#"
num_scenes = 1
seed = 31

[scene]
num_instances = 3
points_per_instance = [120, 160]
"#,
    )
    .unwrap();
    path
}

#[test]
fn pipeline_prints_metrics_and_writes_artifacts() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("run");
    spseg()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .assert()
        .success()
        .stdout(predicate::str::contains("metric\tvalue"))
        .stdout(predicate::str::contains("ap50\t1"));
    assert!(out.join("metrics.tsv").exists());
    assert!(out.join("scene_0000/final.assignments.tsv").exists());
}

#[test]
fn generate_then_oversegment() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("scenes");
    spseg()
        .args(["generate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .assert()
        .success()
        .stdout(predicate::str::contains("scene_0000.spc"));
    spseg()
        .args(["oversegment", "--config"])
        .arg(&cfg)
        .arg("--input")
        .arg(out.join("scene_0000.spc"))
        .arg("--out")
        .arg(dir.path().join("seg"))
        .assert()
        .success()
        .stdout(predicate::str::contains("superpoints"));
    assert!(dir.path().join("seg/superpoints.txt").exists());
}

#[test]
fn evaluate_rescore_matches_pipeline() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("run");
    let pipeline_out = spseg()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(pipeline_out.status.success());
    spseg()
        .args(["evaluate", "--config"])
        .arg(&cfg)
        .arg("--results")
        .arg(out.join("scene_0000/final"))
        .arg("--cloud")
        .arg(out.join("scene_0000/cloud.spc"))
        .assert()
        .success()
        .stdout(predicate::str::contains("ap50\t1"));
}

#[test]
fn propagate_reports_rounds() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    spseg()
        .args(["propagate", "--config"])
        .arg(&cfg)
        .args(["--rounds", "2", "--steps", "2"])
        .assert()
        .success()
        .stdout(predicate::str::contains("round\tproportion\taccuracy"))
        .stdout(predicate::str::contains("\n2\t"));
}

#[test]
fn sweep_emits_one_table() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path());
    let grid = dir.path().join("grid.toml");
    std::fs::write(&grid, "modes = [\"random_only\", \"affinity_semantic\"]\nsteps = [2]\n")
        .unwrap();
    spseg()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--grid")
        .arg(&grid)
        .assert()
        .success()
        .stdout(predicate::str::contains("mode\tsteps\trounds"))
        .stdout(predicate::str::contains("random_only"))
        .stdout(predicate::str::contains("affinity_semantic"));
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "steps = 0\n").unwrap();
    spseg()
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .assert()
        .code(2)
        .stderr(predicate::str::contains("steps"));

    spseg()
        .args(["pipeline", "--mode", "bogus"])
        .assert()
        .code(2);
}

#[test]
fn missing_input_exits_with_one() {
    let dir = tempdir().unwrap();
    spseg()
        .args(["oversegment", "--input"])
        .arg(dir.path().join("nope.spc"))
        .assert()
        .code(1);
}
