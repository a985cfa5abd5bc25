use std::path::Path;
use std::process::{Command, Output};

fn csgopt(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_csgopt"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("CSGOPT_THREADS", t),
        None => cmd.env_remove("CSGOPT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run_to(path: &Path, extra: &[&str], threads: Option<&str>) -> Vec<u8> {
    let mut args = extra.to_vec();
    let p = path.to_str().unwrap();
    args.extend(["--out", p, "-q"]);
    let out = csgopt(&args, threads);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(path).unwrap()
}

#[test]
fn frozen_start_with_zero_step() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(
        &dir.path().join("f.csv"),
        &["constant-steps", "--replicates", "1", "--iters", "1", "--tau", "0", "--optimizer", "csg"],
        None,
    );
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,median,p10,p25,p75,p90,series"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[6], "csg tau=0");
        // all quantiles of a single replicate coincide, and the iterate never moves
        assert!(r[1..6].iter().all(|v| *v == rows[0][1]), "{r:?}");
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["rosenbrock", "--replicates", "5", "--iters", "40", "--seed", "9"];
    let a = run_to(&dir.path().join("a.csv"), &args, Some("1"));
    let b = run_to(&dir.path().join("b.csv"), &args, Some("3"));
    let c = run_to(&dir.path().join("c.csv"), &args, Some("1"));
    assert_eq!(a, b);
    assert_eq!(a, c);
    let args = ["constant-steps", "--replicates", "6", "--iters", "30", "--format", "json"];
    // the report records its own path, so both runs write to the same file
    let path = dir.path().join("r.json");
    let a = run_to(&path, &args, Some("2"));
    let b = run_to(&path, &args, None);
    assert_eq!(a, b);
    serde_json::from_slice::<serde_json::Value>(&a).unwrap();
}

#[test]
fn seed_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["constant-steps", "--replicates", "3", "--iters", "20", "--tau", "1"];
    let a = run_to(&dir.path().join("a.csv"), &[&base[..], &["--seed", "1"]].concat(), None);
    let b = run_to(&dir.path().join("b.csv"), &[&base[..], &["--seed", "2"]].concat(), None);
    assert_ne!(a, b);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(&cfg, r#"{"experiment": "single-run", "replicates": 2, "iters": 15}"#).unwrap();
    let csv = run_to(
        &dir.path().join("s.csv"),
        &["--config", cfg.to_str().unwrap(), "--optimizer", "scibl", "--problem", "quadratic"],
        None,
    );
    let text = String::from_utf8(csv).unwrap();
    // header plus iterations 0..=15
    assert_eq!(text.lines().count(), 17);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",scibl")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.csv");
    let out = csgopt(&["constant-steps", "--replicates", "1", "--iters", "2", "--out", ok.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("wrote"), "{stdout}");

    // usage errors
    for args in [
        vec!["no-such-experiment"],
        vec!["constant-steps", "--replicates", "0"],
        vec!["constant-steps", "--tau", "abc"],
        vec!["constant-steps", "--optimizer", "adagrad"],
        vec![],
    ] {
        let out = csgopt(&args, None);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = csgopt(&["constant-steps", "--iters", "2"], Some("zero"));
    assert_eq!(out.status.code(), Some(2));

    // runtime error: the output path is a directory
    let out = csgopt(&["constant-steps", "--replicates", "1", "--iters", "2", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("csgopt: "));
}
