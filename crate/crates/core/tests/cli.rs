use std::path::Path;
use std::process::{Command, Output};

fn starsim(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_starsim"));
    cmd.args(args).env_remove("STARSIM_THREADS");
    if let Some(t) = threads {
        cmd.env("STARSIM_THREADS", t);
    }
    cmd.output().expect("spawn starsim")
}

fn small_sweep(out: &Path, threads: &str) -> Output {
    starsim(
        &[
            "sweep",
            "--elements",
            "4:6:2",
            "--protocols",
            "ES,MS,Omni",
            "--scenario",
            "unicast",
            "--trials",
            "3",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ],
        Some(threads),
    )
}

#[test]
fn sweep_writes_outputs_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_sweep(a.path(), "1").status.success());
    assert!(small_sweep(b.path(), "2").status.success());
    for f in ["trials.csv", "aggregate.csv", "plot_unicast.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert!(!a.path().join("plot_multicast.csv").exists());
    let trials = std::fs::read_to_string(a.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 3 * 2 * 3);
    let plot = std::fs::read_to_string(a.path().join("plot_unicast.csv")).unwrap();
    assert_eq!(
        plot.lines().next().unwrap(),
        "M,ES_mean_dbm,ES_ci_db,MS_mean_dbm,MS_ci_db,Omni_mean_dbm,Omni_ci_db"
    );
    assert_eq!(plot.lines().count(), 3);
}

#[test]
fn plotdata_regenerates_plot_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_sweep(dir.path(), "1").status.success());
    let plot = dir.path().join("plot_unicast.csv");
    let before = std::fs::read(&plot).unwrap();
    std::fs::remove_file(&plot).unwrap();
    let out = starsim(&["plotdata", "--in", dir.path().to_str().unwrap()], None);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&plot).unwrap(), before);
}

#[test]
fn run_reads_config_and_rejects_typos() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg,
        r#"{"elements": [4], "trials": 1, "protocols": ["TS", "Conventional"], "scenarios": ["multicast"],
            "grids": {"n_phase": 8, "n_amplitude": 5, "restarts": 1}}"#,
    )
    .unwrap();
    let out = starsim(
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("plot_multicast.csv").exists());

    std::fs::write(&cfg, r#"{"trails": 1}"#).unwrap();
    let out = starsim(&["run", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "--config", "/nonexistent/cfg.json"],
        vec!["sweep", "--elements", "5", "--out", d],
        vec!["sweep", "--elements", "x:y", "--out", d],
        vec!["sweep", "--protocols", "ES,XY", "--out", d],
        vec!["sweep", "--scenario", "broadcast", "--out", d],
        vec!["sweep", "--trials", "0", "--out", d],
        vec!["plotdata", "--in", "/nonexistent"],
        vec!["bogus-subcommand"],
    ] {
        let out = starsim(&args, None);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = starsim(
        &["sweep", "--elements", "4", "--trials", "1", "--out", d],
        Some("zero"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_passes_and_detects_injected_fault() {
    let out = starsim(&["validate", "--instances", "20"], None);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("PASS  energy conservation"));

    let out = starsim(
        &[
            "validate",
            "--instances",
            "5",
            "--inject-fault",
            "conservation",
        ],
        None,
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{text}");
    assert!(text.contains("FAIL  energy conservation"));
}
