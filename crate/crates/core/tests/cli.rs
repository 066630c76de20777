use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rcurc::io::{read_matrix, read_trace};

fn rcurc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcurc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn synth_sample_solve_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (prob, obs, sol) = (dir.path().join("p"), dir.path().join("o"), dir.path().join("s"));
    let out = rcurc(&[
        "synth",
        "--n1",
        "60",
        "--n2",
        "50",
        "--rank",
        "2",
        "--alpha",
        "0",
        "--seed",
        "4",
        "--out",
        path(&prob),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_matrix(prob.join("y.rcm")).unwrap().shape(), (60, 50));

    let out = rcurc(&[
        "sample",
        "--input",
        path(&prob.join("y.rcm")),
        "--row-frac",
        "0.5",
        "--col-frac",
        "0.5",
        "--p-row",
        "1",
        "--p-col",
        "1",
        "--seed",
        "1",
        "--out",
        path(&obs),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // The solver needs only the observation.
    fs::remove_file(prob.join("y.rcm")).unwrap();
    let out = rcurc(&[
        "solve",
        "--obs",
        path(&obs.join("observation.json")),
        "--rank",
        "2",
        "--eps",
        "1e-20",
        "--max-iters",
        "5",
        "--out",
        path(&sol),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (rows, _) = read_trace(sol.join("trace.csv")).unwrap();
    assert!(!rows.is_empty());
    let summary = json(&fs::read(sol.join("summary.json")).unwrap());
    assert_eq!(summary["schema"], 1);

    let out = rcurc(&[
        "eval",
        "--truth",
        path(&prob.join("x_true.rcm")),
        "--factors",
        path(&sol),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out.stdout);
    assert!(report["recovery_error"].as_f64().unwrap() <= 1e-10, "{report}");
}

#[test]
fn repeats_write_one_trace_each() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcurc(&[
        "run",
        "--n1",
        "40",
        "--n2",
        "40",
        "--rank",
        "2",
        "--alpha",
        "0.05",
        "--max-iters",
        "20",
        "--repeats",
        "3",
        "--seed",
        "10",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..3 {
        assert!(dir.path().join(format!("trace_{i}.csv")).is_file());
        assert!(dir.path().join(format!("observation_{i}.json")).is_file());
    }
    let summary = json(&fs::read(dir.path().join("summary.json")).unwrap());
    let repeats = summary["repeats"].as_array().unwrap();
    let seeds: Vec<u64> = repeats.iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, [10, 11, 12]);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = rcurc(&[
            "run",
            "--n1",
            "80",
            "--n2",
            "70",
            "--rank",
            "3",
            "--max-iters",
            "30",
            "--seed",
            "5",
            "--deterministic",
            "--out",
            path(out_dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["trace.csv", "observation.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let strip = |p: &Path| {
        let mut v = json(&fs::read(p.join("summary.json")).unwrap());
        v["config"]["outputs"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn missing_input_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcurc(&[
        "solve",
        "--obs",
        path(&dir.path().join("absent.json")),
        "--rank",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage=io"));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(rcurc(&["solve"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = rcurc(&["run", "--gamma", "1.5", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcurc(&[
        "run",
        "--n1",
        "40",
        "--n2",
        "40",
        "--rank",
        "2",
        "--max-iters",
        "1",
        "--eps",
        "1e-30",
        "--strict",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage=solve"));
}

#[test]
fn config_file_drives_run() {
    let dir = tempfile::tempdir().unwrap();
    let outputs = dir.path().join("out");
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        format!(
            "seed = 2\noutputs = {:?}\n[problem]\nkind = \"synthetic\"\nn1 = 50\nn2 = 40\nrank = 2\nalpha = 0.0\n\
             [sampling]\nrow_frac = 0.5\ncol_frac = 0.5\np_row = 1.0\np_col = 1.0\n[solver]\nrank = 2\neps = 1e-18\nmax_iters = 4\n",
            path(&outputs)
        ),
    )
    .unwrap();
    let out = rcurc(&["run", "--config", path(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json(&fs::read(outputs.join("summary.json")).unwrap());
    assert!(
        summary["mean"]["recovery_error"].as_f64().unwrap() <= 1e-10,
        "{summary}"
    );
}
