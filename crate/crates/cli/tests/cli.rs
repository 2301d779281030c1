use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use post_core::sequential::LookOutcome;
use post_core::simulation::{gen_batch, replication_rng, CovariateSetting, Method, SimulationConfig};
use post_core::{ExperimentState, GlmFamily, PenaltyConfig};
use serde_json::Value;
use tempfile::TempDir;

const NULL: &str = "null_gaussian";
const STRONG: &str = "strong_effect";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn post(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_post"))
        .args(args)
        .env_remove("POST_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Payload line of an envelope file.
fn payload(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap();
    serde_json::from_str(text.lines().nth(1).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

fn run_single(name: &str, out: &Path) -> Output {
    post(&["test-run", "--input", s(&fixture(name)), "--output", s(out), "--format", "json"])
}

#[test]
fn single_fixture_exit_codes_and_trajectories() {
    let tmp = TempDir::new().unwrap();
    let before = snapshot(&fixture(NULL));

    let null_out = tmp.path().join("null");
    let out = run_single(NULL, &null_out);
    assert_eq!(code(&out), 10, "{}", String::from_utf8_lossy(&out.stderr));
    let traj = read_json(&null_out.join("trajectory.json"));
    assert_eq!(traj.as_array().unwrap().len(), 2);
    assert_eq!(payload(&null_out.join("decision.jsonl"))["status"], "accepted");

    let strong_out = tmp.path().join("strong");
    let out = run_single(STRONG, &strong_out);
    assert_eq!(code(&out), 0);
    let traj = read_json(&strong_out.join("trajectory.json"));
    let rows = traj.as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["batch"], 0);
    assert_eq!(rows[0]["status"], "rejected");

    assert_eq!(snapshot(&fixture(NULL)), before);
}

#[test]
fn empty_input_is_a_usage_error_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out_dir = tmp.path().join("out");
    let out = post(&["test-run", "--input", s(&empty), "--output", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());

    // A manifest alone is still empty.
    fs::copy(fixture(NULL).join("manifest.json"), empty.join("manifest.json")).unwrap();
    let out = post(&["test-run", "--input", s(&empty), "--output", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(!out_dir.exists());
}

#[test]
fn schema_errors_name_the_location() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("bad");
    fs::create_dir(&dir).unwrap();
    fs::write(dir.join("manifest.json"), r#"{"family": "gaussian_identity", "p": 2}"#).unwrap();
    fs::write(dir.join("batch_000.csv"), "y,a,x1,x2\n1.0,0,0.5,0.1\n2.0,1,abc,0.3\n").unwrap();
    let out = post(&["test-run", "--input", s(&dir), "--output", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("batch_000.csv:3:3"), "{err}");
}

fn multi(procedure: &str, names: &[&str], out: &Path) -> (i32, Vec<u8>) {
    let mut args = vec!["test-multi".to_string(), "--procedure".into(), procedure.into()];
    for n in names {
        args.push("--input".into());
        args.push(fixture(n).display().to_string());
    }
    args.extend(["--output".into(), out.display().to_string(), "--format".into(), "json".into()]);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = post(&argv);
    let rows = read_json(&out.join("decisions.json"));
    let d = rows.as_array().unwrap().iter().map(|r| r["decision"].as_u64().unwrap() as u8).collect();
    (code(&o), d)
}

#[test]
fn multiple_fixtures_decisions_and_nesting() {
    let tmp = TempDir::new().unwrap();
    let (c, by) = multi("by", &[NULL, STRONG], &tmp.path().join("by"));
    assert_eq!(c, 0);
    assert_eq!(by, vec![0, 1]);
    let (_, bc) = multi("bc", &[NULL, STRONG], &tmp.path().join("bc"));
    let (_, bh) = multi("bh", &[NULL, STRONG], &tmp.path().join("bh"));
    for i in 0..2 {
        assert!(bc[i] <= by[i] && by[i] <= bh[i]);
    }
    assert!(tmp.path().join("by/checkpoints/strong_effect.jsonl").is_file());
}

#[test]
fn one_experiment_matches_single_run() {
    let tmp = TempDir::new().unwrap();
    for name in [NULL, STRONG] {
        let single = run_single(name, &tmp.path().join(format!("s_{name}")));
        let single_decision = payload(&tmp.path().join(format!("s_{name}/decision.jsonl")))["status"] == "rejected";
        let (c, d) = multi("by", &[name], &tmp.path().join(format!("m_{name}")));
        assert_eq!(d, vec![u8::from(single_decision)]);
        assert_eq!(c, code(&single));
    }
}

#[test]
fn mismatched_schedules_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let short = tmp.path().join("short");
    fs::create_dir(&short).unwrap();
    fs::copy(fixture(NULL).join("manifest.json"), short.join("manifest.json")).unwrap();
    fs::copy(fixture(NULL).join("batch_000.csv"), short.join("batch_000.csv")).unwrap();
    let o = post(&[
        "test-multi",
        "--input",
        s(&short),
        "--input",
        s(&fixture(STRONG)),
        "--output",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generated_files_reproduce_the_in_memory_trajectory() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("gen");
    let (seed, b, p, batch_n, batches) = (41u64, 0.3, 8usize, 60usize, 3usize);
    let o = post(&[
        "generate",
        "--output",
        s(&dir),
        "--family",
        "poisson",
        "--b",
        &b.to_string(),
        "--p",
        &p.to_string(),
        "--batch-n",
        &batch_n.to_string(),
        "--batches",
        &batches.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(code(&o), 0);
    let out = tmp.path().join("out");
    post(&["test-run", "--input", s(&dir), "--output", s(&out), "--format", "json", "--penalty", "scad"]);
    let traj = read_json(&out.join("trajectory.json"));
    let from_files: Vec<Option<f64>> = traj.as_array().unwrap().iter().map(|r| r["lambda_stat"].as_f64()).collect();

    let mut cfg = SimulationConfig::new(GlmFamily::poisson(), CovariateSetting::Nu, Method::PostScad, b);
    cfg.p = p;
    cfg.theta0 = post_core::simulation::default_theta0(p);
    cfg.batch_n = batch_n;
    cfg.horizon_n = batch_n * batches;
    let beta = cfg.beta();
    let mut rng = replication_rng(seed, 0, 0);
    let mut state =
        ExperimentState::new("gen", GlmFamily::poisson(), PenaltyConfig::scad(), p + 1, 0.05, cfg.horizon_n).unwrap();
    let mut in_memory = Vec::new();
    for k in 0..batches {
        let batch = gen_batch(&cfg, &beta, k as u64, &mut rng).unwrap();
        if state.status.is_terminal() {
            break;
        }
        in_memory.push(match state.ingest_batch(batch).unwrap() {
            LookOutcome::Computed(r) => Some(r.lambda_stat),
            LookOutcome::Skipped(_) => None,
        });
    }
    assert_eq!(from_files, in_memory);
    assert!(from_files.iter().any(Option::is_some));
}

#[test]
fn resume_continues_where_the_checkpoint_stopped() {
    let tmp = TempDir::new().unwrap();
    let partial = tmp.path().join("null_gaussian");
    fs::create_dir(&partial).unwrap();
    let manifest = fs::read_to_string(fixture(NULL).join("manifest.json")).unwrap();
    let manifest = manifest.replacen('{', "{\n  \"batches\": [\"batch_000.csv\"],", 1);
    fs::write(partial.join("manifest.json"), manifest).unwrap();
    fs::copy(fixture(NULL).join("batch_000.csv"), partial.join("batch_000.csv")).unwrap();

    let first = tmp.path().join("first");
    let o = post(&["test-run", "--input", s(&partial), "--output", s(&first), "--horizon", "200"]);
    assert_eq!(code(&o), 11, "{}", String::from_utf8_lossy(&o.stderr));

    let resumed = tmp.path().join("resumed");
    let cp = first.join("checkpoint.jsonl");
    let o = post(&["test-run", "--input", s(&fixture(NULL)), "--output", s(&resumed), "--resume", s(&cp)]);
    assert_eq!(code(&o), 10);
    let direct = tmp.path().join("direct");
    run_single(NULL, &direct);
    assert_eq!(fs::read(resumed.join("checkpoint.jsonl")).unwrap(), fs::read(direct.join("checkpoint.jsonl")).unwrap());
}

#[test]
fn checkpoint_commands() {
    let tmp = TempDir::new().unwrap();
    run_single(NULL, tmp.path());
    let cp = tmp.path().join("checkpoint.jsonl");
    let o = post(&["checkpoint", "show", s(&cp)]);
    assert_eq!(code(&o), 0);
    let shown: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(shown["batches_ingested"], 2);
    assert_eq!(code(&post(&["checkpoint", "verify", s(&cp)])), 0);

    let mut bytes = fs::read(&cp).unwrap();
    let k = bytes.len() - 10;
    bytes[k] = if bytes[k] == b'1' { b'2' } else { b'1' };
    let bad = tmp.path().join("tampered.jsonl");
    fs::write(&bad, bytes).unwrap();
    assert_eq!(code(&post(&["checkpoint", "verify", s(&bad)])), 3);
}

#[test]
fn config_file_and_output_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.json");
    let from_config = tmp.path().join("from_config");
    fs::write(&cfg, format!(r#"{{"alpha": 0.5, "output": "{}", "format": "json"}}"#, s(&from_config))).unwrap();
    let o = post(&["test-run", "--input", s(&fixture(NULL)), "--config", s(&cfg)]);
    // p = 0.44 crosses 0.5 at the first look.
    assert_eq!(code(&o), 0);
    assert!(from_config.join("trajectory.json").is_file());

    let from_flag = tmp.path().join("from_flag");
    let o = post(&["test-run", "--input", s(&fixture(NULL)), "--config", s(&cfg), "--alpha", "0.05", "--output", s(&from_flag)]);
    assert_eq!(code(&o), 10);
    assert!(from_flag.join("trajectory.json").is_file());

    let from_env = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_post"))
        .args(["test-run", "--input", s(&fixture(NULL))])
        .env("POST_OUTPUT_DIR", &from_env)
        .output()
        .unwrap();
    assert_eq!(code(&o), 10);
    assert!(from_env.join("trajectory.csv").is_file());

    fs::write(&cfg, r#"{"alpha": 0.1, "alfa": 0.2}"#).unwrap();
    assert_eq!(code(&post(&["test-run", "--input", s(&fixture(NULL)), "--config", s(&cfg)])), 2);
}

#[test]
fn simulate_is_deterministic_and_single_replication_has_zero_spread() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &Path| {
        let o = post(&[
            "simulate", "--design", "table3", "--method", "adalasso", "--link", "identity", "--setting", "nu", "--reps",
            "1", "--seed", "1", "--output", s(dir),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&a);
    run(&b);
    assert_eq!(snapshot(&a), snapshot(&b));

    let mut reader = csv::Reader::from_path(a.join("metrics.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    assert_eq!(&rows[0][col("replications")], "1");
    assert_eq!(rows[0][col("rejection_std")].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][col("filter_std")].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn simulate_multiple_writes_trajectories() {
    let tmp = TempDir::new().unwrap();
    let o = post(&[
        "simulate", "--design", "multiple", "--reps", "2", "--m", "4", "--nulls", "2", "--p", "8", "--batch-n", "50",
        "--horizon", "100", "--trajectories", "--output", s(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(tmp.path().join("trajectory_post-adalasso_identity_nu.csv")).unwrap();
    assert_eq!(reader.records().count(), 2);
    assert_eq!(code(&post(&["simulate", "--design", "multiple", "--m", "4", "--nulls", "9"])), 2);
}
