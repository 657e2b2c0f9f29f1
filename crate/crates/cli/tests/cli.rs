use std::path::Path;
use std::process::{Command, Output};

fn evoindex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evoindex"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_ABSTRACT: &str = r#"
mode = "abstract"
s0 = 2000
alpha = 0.1
lambda = 50
horizon = 30
seeds = [1, 2, 3, 4, 5, 6, 7, 8]
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn oracle_prints_t90() {
    let out = evoindex(&["oracle", "--alpha", "1/20", "--s0", "500000", "--horizon", "60"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.ends_with("t90: 46.05 days\n"));
    assert_eq!(text.lines().count(), 1 + 61 + 1);
    let out = evoindex(&["oracle", "--alpha", "0.025", "--s0", "10", "--horizon", "5"]);
    assert!(stdout(&out).contains("92.10"));
}

#[test]
fn oracle_rejects_bad_input() {
    for args in [
        ["oracle", "--alpha", "0.05", "--s0", "0", "--horizon", "10"],
        ["oracle", "--alpha", "-1", "--s0", "10", "--horizon", "10"],
        ["oracle", "--alpha", "0.05", "--s0", "10", "--horizon", "0"],
    ] {
        let out = evoindex(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn simulate_writes_outputs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_ABSTRACT);
    let out_dir = dir.path().join("out");
    let out = evoindex(&["simulate", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", stdout(&out), stderr(&out));
    for name in ["ensemble.csv", "click_histogram.csv", "summary.txt", "trajectory_seed_1.csv"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let first = std::fs::read(out_dir.join("ensemble.csv")).unwrap();
    let again = evoindex(&["simulate", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read(out_dir.join("ensemble.csv")).unwrap(), first);
}

#[test]
fn seeds_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_ABSTRACT);
    let out_dir = dir.path().join("out");
    let out = evoindex(&["simulate", &cfg, "--seeds", "11,12,13", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out_dir.join("trajectory_seed_12.csv").exists());
    assert!(!out_dir.join("trajectory_seed_1.csv").exists());
    let bad = evoindex(&["simulate", &cfg, "--seeds", "1,x"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn missing_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_ABSTRACT.replace("horizon = 30\n", ""));
    let out = evoindex(&["simulate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("horizon"), "{}", stderr(&out));
}

#[test]
fn syntax_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mode = \"abstract\"\ns0 = \n");
    let out = evoindex(&["simulate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn wrong_theory_fails_with_exit_1() {
    // a mechanistic run that cannot converge within a tiny horizon
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
mode = "mechanistic"
s0 = 600
lambda = 5
horizon = 4
sample_interval = 1
seeds = [1, 2]
truth.terms = 200
truth.objects = 200
"#,
    );
    let out = evoindex(&["simulate", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("never reached"));
}
