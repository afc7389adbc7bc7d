//! Config parsing, overrides, exit codes and manifests of the command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kesten_evt::cli::{self, RunConfig, EXIT_ERROR, EXIT_OK, EXIT_UNRELIABLE, MANIFEST};
use kesten_evt::Error;
use serde_json::Value;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kesten-evt"))
        .args(args)
        .env_remove("KESTEN_EVT_THREADS")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{
  "model": {
    "dimension": 1,
    "a_law": { "ScalarTwoPoint": { "a1": 2.0, "a2": 0.5, "p": 0.3333333333333333 } },
    "b_law": { "Constant": [1.0] }
  },
  "budget": { "path_length": 2000, "replicas": 50, "batch": 2000 },
  "seed": 9
}"#;

fn config_field(e: Error) -> String {
    match e {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn shipped_configs_parse() {
    for name in ["l2p.json", "tuned07.json", "lognormal.json", "garch.json", "bernoulli_pair.json", "rotation2d.json"] {
        RunConfig::load(&config_path(name), &[], None, None).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn alpha_on_l2p_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("l2p.json");
    let out =
        bin(&["alpha", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--threads", "2"]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let sol = read_json(&dir.path().join("alpha.json"));
    assert!((sol["alpha"].as_f64().unwrap() - 1.0).abs() < 1e-6, "{sol}");
    assert_eq!(sol["exact"], Value::Bool(true));

    let manifest = read_json(&dir.path().join(MANIFEST));
    let expected = RunConfig::load(&cfg, &[], None, None).unwrap().hash();
    assert_eq!(manifest["command"], "alpha");
    assert_eq!(manifest["config_hash"].as_str().unwrap(), expected);
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["threads"], 2);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(manifest["versions"].is_object());
    let listed: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(listed.contains(&"alpha.json") && listed.contains(&"moment_curve.csv"));
    for name in listed {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let csv = fs::read_to_string(dir.path().join("moment_curve.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "s,log_k,stderr,n_used,replicas");
}

#[test]
fn malformed_json_reports_line() {
    let e = RunConfig::from_json("{\n  \"seed\": 1,\n  \"model\": [\n}", &[], None, None).unwrap_err();
    assert!(config_field(e).starts_with("line 4"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"seed\": 1, ").unwrap();
    let out = bin(&["check", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn schema_errors_name_the_field() {
    let typo = SMALL.replace("\"replicas\"", "\"replica\"");
    assert!(config_field(RunConfig::from_json(&typo, &[], None, None).unwrap_err()).starts_with("budget"));

    let wrong_type = RunConfig::from_json(SMALL, &["options.k_frac=\"big\"".into()], None, None).unwrap_err();
    assert_eq!(config_field(wrong_type), "options.k_frac");

    let no_seed = SMALL.replace("\"seed\": 9", "\"output_dir\": \"x\"");
    assert!(RunConfig::from_json(&no_seed, &[], None, None).is_err());

    let zero = RunConfig::from_json(SMALL, &["budget.replicas=0".into()], None, None).unwrap_err();
    assert_eq!(config_field(zero), "budget.replicas");

    let bad_model = SMALL.replace("0.3333333333333333", "1.5");
    assert_eq!(config_field(RunConfig::from_json(&bad_model, &[], None, None).unwrap_err()), "model");
}

#[test]
fn overrides_seed_and_out() {
    let cfg = RunConfig::from_json(
        SMALL,
        &["budget.replicas=7".into(), "options.alpha=1.5".into(), "options.norm=Manhattan".into()],
        Some(42),
        Some(Path::new("elsewhere")),
    )
    .unwrap();
    assert_eq!(cfg.budget.replicas, 7);
    assert_eq!(cfg.options.alpha, Some(1.5));
    assert_eq!(cfg.options.norm, kesten_evt::linalg::VectorNorm::Manhattan);
    assert_eq!(cfg.seed, 42);
    assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
    assert!(cli::apply_override(&mut Value::Null, "no_equals_sign").is_err());
    assert!(cli::apply_override(&mut Value::Null, "a..b=1").is_err());
}

#[test]
fn hash_ignores_output_dir_only() {
    let a = RunConfig::from_json(SMALL, &[], None, Some(Path::new("a"))).unwrap();
    let b = RunConfig::from_json(SMALL, &[], None, Some(Path::new("b"))).unwrap();
    let c = RunConfig::from_json(SMALL, &[], Some(10), Some(Path::new("a"))).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert!(a.hash().starts_with("sha256:"));
}

#[test]
fn soft_flags_give_exit_two() {
    // A = 1/2 is a pure contraction: k(s) < 1 for all s > 0, so the condition check flags it.
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_path("bernoulli_pair.json");
    let out = bin(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_UNRELIABLE), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = read_json(&dir.path().join(MANIFEST));
    assert_eq!(manifest["flags"][0], "ConditionNotMet");
}

#[test]
fn missing_config_and_unknown_command() {
    let out = bin(&["simulate"]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    assert_ne!(bin(&["frobnicate"]).status.code(), Some(EXIT_OK));
    let cfg = RunConfig::from_json(SMALL, &[], None, None).unwrap();
    assert!(cli::execute("frobnicate", &cfg, 1).is_err());
}

#[test]
fn threads_default_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.json");
    fs::write(&cfg, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kesten-evt"))
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .env("KESTEN_EVT_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("o").join(MANIFEST))["threads"], 3);
    let traj = fs::read_to_string(dir.path().join("o/trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("k,x0"));
    assert_eq!(lines.count(), 2000);
}

#[test]
fn suite_subset_prints_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        bin(&["suite", "--seed", "1", "--out", dir.path().to_str().unwrap(), "--override", "options.criteria=[1,15]"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2, "{stdout}");
    assert!(lines[0].starts_with("PASS 01 ") || lines[0].starts_with("FAIL 01 "));
    assert!(lines[1].contains(" 15 "));
    let expected = if lines.iter().all(|l| l.starts_with("PASS")) { EXIT_OK } else { EXIT_ERROR };
    assert_eq!(out.status.code(), Some(expected));
    assert_eq!(read_json(&dir.path().join("suite.json")).as_array().unwrap().len(), 2);
}
