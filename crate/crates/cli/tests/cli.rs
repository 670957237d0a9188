//! End-to-end runs of the installed binary. The determinism checks work on
//! raw file bytes, not parsed values: reruns must reproduce every character.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tempo"))
}

fn run_ok(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = bin();
    cmd.args(args).env_remove("TEMPO_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "tempo {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = bin();
    cmd.args(args).env_remove("TEMPO_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    assert!(!out.status.success(), "tempo {args:?} unexpectedly succeeded");
    out
}

/// A benchmark config small enough for unoptimized binaries.
const TINY_BENCHMARK: &str = r#"{"t_max": 30.0, "n_pred": 2, "n_corr": 2}"#;

/// A regression config that exercises both a lossy and (in the noisy variant
/// below) an imperfect channel.
const TINY_REGRESSION: &str = r#"{
    "n_agents": 8,
    "num_samples": 150,
    "topologies": [{"kind": "random", "p": 0.5}, {"kind": "complete"}],
    "channel": {"kind": "lossy", "p_drop": 0.2}
}"#;

const TINY_REGRESSION_NOISY: &str = r#"{
    "n_agents": 8,
    "num_samples": 150,
    "topologies": [{"kind": "circulant", "degree": 2}],
    "channel": {"kind": "noisy", "sigma": 0.05}
}"#;

fn write(dir: &Path, name: &str, content: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));
    files
}

#[test]
fn list_scenarios_prints_the_known_identifiers() {
    let out = run_ok(&["list-scenarios"], &[]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "benchmark\ndistributed-regression\n");
}

#[test]
fn criterion_6_cli_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cases = [
        ("benchmark", write(dir, "bench.json", TINY_BENCHMARK)),
        ("distributed-regression", write(dir, "reg-lossy.json", TINY_REGRESSION)),
        ("distributed-regression", write(dir, "reg-noisy.json", TINY_REGRESSION_NOISY)),
    ];
    let mut total = 0;
    for (i, (scenario, config)) in cases.iter().enumerate() {
        let out_a = dir.join(format!("a{i}"));
        let out_b = dir.join(format!("b{i}"));
        for out in [&out_a, &out_b] {
            run_ok(
                &[
                    "run",
                    "--scenario",
                    scenario,
                    "--config",
                    config,
                    "--seed",
                    "9",
                    "--out",
                    out.to_str().unwrap(),
                ],
                &[],
            );
        }
        let a = read_dir_files(&out_a);
        let b = read_dir_files(&out_b);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{scenario} with {config} differed between reruns");
        total += a.len();
    }
    println!("criterion 6: PASS — {total} trace files reproduced byte-identically across reruns, including lossy and noisy channel runs");
}

#[test]
fn seed_precedence_is_flag_then_env_then_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let config = write(dir, "reg.json", TINY_REGRESSION);
    let run_with = |name: &str, extra: &[&str], envs: &[(&str, &str)]| {
        let out = dir.join(name);
        let mut cmd = bin();
        cmd.args(["run", "--scenario", "distributed-regression", "--config", &config, "--out"])
            .arg(&out)
            .args(extra)
            .env_remove("TEMPO_SEED");
        for (k, v) in envs {
            cmd.env(k, v);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read_dir_files(&out)
    };

    let flag5 = run_with("flag5", &["--seed", "5"], &[]);
    let env5 = run_with("env5", &[], &[("TEMPO_SEED", "5")]);
    let flag_beats_env = run_with("mixed", &["--seed", "5"], &[("TEMPO_SEED", "6")]);
    let env7 = run_with("env7", &[], &[("TEMPO_SEED", "7")]);
    let default0 = run_with("default0", &[], &[]);
    let flag0 = run_with("flag0", &["--seed", "0"], &[]);

    assert_eq!(flag5, env5);
    assert_eq!(flag5, flag_beats_env);
    assert_ne!(flag5, env7);
    assert_eq!(default0, flag0);
}

#[test]
fn unknown_scenario_fails_and_names_the_valid_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_err(
        &["run", "--scenario", "nonsense", "--out", tmp.path().to_str().unwrap()],
        &[],
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("benchmark") && stderr.contains("distributed-regression"), "{stderr}");
}

#[test]
fn missing_out_flag_is_a_usage_error() {
    let out = run_err(&["run", "--scenario", "benchmark"], &[]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn malformed_config_and_seed_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let bad = write(dir, "bad.json", "{\"t_max\": \"soon\"}");
    let out_dir = dir.join("out");
    let out = run_err(
        &[
            "run",
            "--scenario",
            "benchmark",
            "--config",
            &bad,
            "--out",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));

    let config = write(dir, "ok.json", TINY_BENCHMARK);
    let out = run_err(
        &[
            "run",
            "--scenario",
            "benchmark",
            "--config",
            &config,
            "--out",
            out_dir.to_str().unwrap(),
        ],
        &[("TEMPO_SEED", "not-a-number")],
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("TEMPO_SEED"));
}

#[test]
fn compare_merges_named_runs_into_one_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let doc_a = write(
        dir,
        "a.json",
        &format!(r#"{{"name": "warmup", "scenario": "benchmark", "config": {TINY_BENCHMARK}}}"#),
    );
    let doc_b = write(
        dir,
        "b.json",
        &format!(
            r#"{{"name": "net", "scenario": "distributed-regression", "seed": 3, "config": {TINY_REGRESSION}}}"#
        ),
    );
    let out_dir = dir.join("cmp");
    run_ok(
        &["compare", "--configs", &doc_a, &doc_b, "--out", out_dir.to_str().unwrap()],
        &[],
    );
    let text = fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "name,trace,step,time,tracking_error,fixed_point_residual,regret"
    );
    assert!(text.lines().any(|l| l.starts_with("warmup,correction-only,")));
    assert!(text.lines().any(|l| l.starts_with("warmup,prediction-correction,")));
    assert!(text.lines().any(|l| l.starts_with("net,random,")));
    assert!(text.lines().any(|l| l.starts_with("net,complete,")));
    // No per-coordinate columns: every row has exactly the seven fields.
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), 7, "{line}");
    }

    let again = dir.join("cmp2");
    run_ok(
        &["compare", "--configs", &doc_a, &doc_b, "--out", again.to_str().unwrap()],
        &[],
    );
    assert_eq!(fs::read(out_dir.join("compare.csv")).unwrap(), fs::read(again.join("compare.csv")).unwrap());
}

#[test]
fn compare_rejects_duplicate_names() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let doc = write(
        dir,
        "dup.json",
        &format!(r#"{{"name": "same", "scenario": "benchmark", "config": {TINY_BENCHMARK}}}"#),
    );
    let out = run_err(
        &["compare", "--configs", &doc, &doc, "--out", dir.join("o").to_str().unwrap()],
        &[],
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}
