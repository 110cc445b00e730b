use std::path::Path;
use std::process::{Command, Output};

use rmotion::output::read_csv;
use serde_json::Value;

fn rmotion(args: &[&str], out: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rmotion"));
    c.args(args);
    if let Some(p) = out {
        c.arg("--out").arg(p);
    }
    c.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn columns(path: &Path) -> Vec<String> {
    read_csv(path).unwrap().1
}

#[test]
fn missing_profile_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmotion(&["simulate", "vrjp", "--n", "3"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("profile"), "{}", stderr(&o));
}

#[test]
fn bad_flags_and_names_exit_2() {
    assert_eq!(rmotion(&["simulate", "vrjp", "--bogus"], None).status.code(), Some(2));
    assert_eq!(rmotion(&["verify", "no-such-suite"], None).status.code(), Some(2));
    assert_eq!(rmotion(&["lrm", "rescale", "--profile", "unit"], None).status.code(), Some(2));
    assert_eq!(rmotion(&["env", "sample", "--profile", "unit", "--kind", "weird"], None).status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"profile": {"kind": "unit"}, "n": 3, "t_max": 0.25, "seed": 4}"#).unwrap();
    let out = dir.path().join("run");
    let o = rmotion(&["simulate", "vrjp", "--config", cfg.to_str().unwrap(), "--t-max", "0.5"], Some(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, _, rows) = read_csv(&out.join("summary.csv")).unwrap();
    let config = &header["config"];
    assert_eq!(config["n"], 3);
    assert_eq!(config["seed"], 4);
    assert_eq!(config["t_max"], 0.5);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn same_seed_gives_identical_files_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = rmotion(
            &["simulate", "vrjp", "--profile", "unit", "--n", "4", "--t-max", "1", "--replicas", "6", "--seed", "11", "--threads", threads],
            Some(&out),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        ["trajectory.csv", "local_times.csv", "summary.csv"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "3"));

    let out = dir.path().join("d");
    let o = rmotion(
        &["simulate", "vrjp", "--profile", "unit", "--n", "4", "--t-max", "1", "--replicas", "6", "--seed", "12"],
        Some(&out),
    );
    assert!(o.status.success());
    assert_ne!(a[0], std::fs::read(out.join("trajectory.csv")).unwrap());
}

#[test]
fn verify_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    std::fs::write(&cfg, r#"{"flow-oracles": {"replicas": 20, "restart_replicas": 5}}"#).unwrap();
    let report = dir.path().join("report.json");
    let o = rmotion(&["verify", "flow-oracles", "--config", cfg.to_str().unwrap()], Some(&report));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["suite"], "flow-oracles");
    assert_eq!(v["pass"], true);
    assert_eq!(v["params"]["replicas"], 20);

    std::fs::write(&cfg, r#"{"mean_tolerance": 1e-12}"#).unwrap();
    let o = rmotion(&["verify", "sampler-moments", "--replicas", "1000", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));

    let o = rmotion(&["verify", "--list"], None);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 12);
}

#[test]
fn lattice_simulations_write_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("errw");
    let o = rmotion(&["simulate", "errw", "--profile", "unit", "--n", "3", "--steps", "50"], Some(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_csv(&out.join("trajectory.csv")).unwrap().2.len(), 51);

    let out = dir.path().join("envdiff");
    let profile = r#"{"kind": "constant", "c": 1.5, "domain": [-6, 6]}"#;
    let o = rmotion(&["simulate", "envdiff", "--profile", profile, "--m", "3", "--q-max", "0.5"], Some(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(columns(&out.join("local_times.csv"))[..3], ["replica", "site", "x"]);

    for kind in ["discrete", "continuous", "gamma"] {
        let out = dir.path().join(kind);
        let o = rmotion(&["env", "sample", "--profile", "unit", "--kind", kind, "--n", "3"], Some(&out));
        assert!(o.status.success(), "{kind}: {}", stderr(&o));
        assert!(out.join("environment.csv").exists());
    }
}

#[test]
fn flow_run_writes_checkpoints_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let o = rmotion(&["flow", "run", "--u-max", "0.05", "--points", "41", "--stride", "50"], Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, cols, rows) = read_csv(&dir.path().join("checkpoints.csv")).unwrap();
    assert_eq!(cols, ["u", "label", "psi", "mode", "lcal", "lambda"]);
    assert!(rows.len() >= 2 * 41);
    assert_eq!(read_csv(&dir.path().join("reduced.csv")).unwrap().2.len(), 11);
    assert!(dir.path().join("events.csv").exists());
}

#[test]
fn lrm_modes_agree_on_the_unit_profile() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--profile", "unit", "--t-max", "0.2", "--seed", "3", "--points", "101"];
    let path = |mode: &str, extra: &[&str]| {
        let out = dir.path().join(mode);
        let mut args = vec!["lrm", mode];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        let o = rmotion(&args, Some(&out));
        assert!(o.status.success(), "{mode}: {}", stderr(&o));
        read_csv(&out.join("path.csv")).unwrap().2
    };
    let build = path("build", &[]);
    let rescaled = path("rescale", &["--c", "1"]);
    let transferred = path("transfer", &[]);
    assert_eq!(build.len(), rescaled.len());
    let col = |rows: &[Vec<String>], k: usize| rows.iter().map(|r| r[k].parse::<f64>().unwrap()).collect::<Vec<_>>();
    // `replica, u, t, x, l_at_x`; transfer drops the flow clock.
    assert_eq!(col(&build, 3), col(&rescaled, 3));
    assert_eq!(col(&build, 3), col(&transferred, 3));
}
