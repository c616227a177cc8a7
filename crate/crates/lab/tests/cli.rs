use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levy-lab"))
}

fn manifest(dir: &Path, experiment: &str, extra: &str) -> std::path::PathBuf {
    let p = dir.join(format!("{experiment}.toml"));
    let text = format!(
        "experiment = \"{experiment}\"\nseed = 42\nkind = \"BrownianWithDrift\"\nsigma = 1.0\nn_steps = 32\nn_paths = 2000\n{extra}"
    );
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_has_the_fixed_catalog() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names.len(), 10);
    assert!(names.contains(&"vervaat") && names.contains(&"dim-limit"));
}

#[test]
fn vervaat_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), "vervaat", "");
    let run = |out: &str| {
        let st = bin().args(["run", "--quiet", "--out"]).arg(dir.path().join(out)).arg(&m).output().unwrap().status;
        assert_eq!(st.code(), Some(0));
        fs::read(dir.path().join(out).join("vervaat").join("reports.jsonl")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert!(dir.path().join("a/vervaat/summary.txt").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "experiment = \"not-an-experiment\"\nseed = 1\nkind = \"BrownianWithDrift\"\nsigma = 1.0\nn_steps = 4\nn_paths = 4\n").unwrap();
    assert_eq!(bin().args(["run", "--quiet"]).arg(&bad).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("validate-config").arg(&bad).output().unwrap().status.code(), Some(2));
    let no_seed = dir.path().join("noseed.toml");
    fs::write(&no_seed, "experiment = \"vervaat\"\nkind = \"BrownianWithDrift\"\nsigma = 1.0\nn_steps = 4\nn_paths = 4\n").unwrap();
    assert_eq!(bin().arg("validate-config").arg(&no_seed).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let good = manifest(dir.path(), "uniform-rho", "");
    assert_eq!(bin().arg("validate-config").arg(&good).output().unwrap().status.code(), Some(0));
}

#[test]
fn failing_experiment_exits_with_one_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    // 200 bridges cannot bring the Hunt standard error under 1e-3
    let m = manifest(dir.path(), "hunt-q", "");
    let out = dir.path().join("out");
    let st = bin().args(["run", "--quiet", "--n-paths", "200", "--out"]).arg(&out).arg(&m).output().unwrap().status;
    assert_eq!(st.code(), Some(1));
    let lines = fs::read_to_string(out.join("hunt-q/reports.jsonl")).unwrap();
    assert!(lines.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    let written = fs::read_to_string(out.join("hunt-q/manifest.toml")).unwrap();
    assert!(written.contains("n_paths = 200"));
}

#[test]
fn output_dir_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path(), "density-check", "");
    let st = bin().args(["run", "--quiet", "--seed", "5"]).arg(&m).env("LEVY_LAB_OUT", dir.path().join("env")).output().unwrap().status;
    assert_eq!(st.code(), Some(0));
    let written = fs::read_to_string(dir.path().join("env/density-check/manifest.toml")).unwrap();
    assert!(written.contains("seed = 5"));
    assert!(dir.path().join("env/density-check/density.csv").exists());
}
