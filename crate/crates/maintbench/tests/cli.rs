mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{legal_line, sample_data, write_planted};
use serde_json::Value;

fn maintbench(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maintbench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout_paths(out: &Output) -> Vec<PathBuf> {
    String::from_utf8_lossy(&out.stdout).lines().map(PathBuf::from).collect()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let last = text.lines().last().unwrap_or_default();
    serde_json::from_str(last).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn sample_config() -> String {
    sample_data().join("config.toml").display().to_string()
}

/// File contents under `dir` keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn curate_and_run(cwd: &Path) -> PathBuf {
    let data = sample_data();
    let out = maintbench(
        cwd,
        &[
            "curate",
            "--in",
            data.join("sample_logs.csv").to_str().unwrap(),
            "--out",
            "curated.csv",
            "--config",
            &sample_config(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = maintbench(cwd, &["run", "--dataset", "curated.csv", "--config", &sample_config()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    cwd.join(&stdout_paths(&out)[0])
}

#[test]
fn validate_config_accepts_the_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let out = maintbench(tmp.path(), &["validate-config", "--config", &sample_config()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = maintbench(tmp.path(), &["run", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = maintbench(tmp.path(), &["analyze", "--run", "nope", "--truth", "consensus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["exit_code"], 1);
    let out = maintbench(tmp.path(), &["analyze", "--run", "nope", "--truth", "oracle"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = maintbench(tmp.path(), &["run", "--dataset", "absent.csv", "--config", &sample_config()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains("absent.csv"));
}

#[test]
fn bad_config_names_the_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(sample_data().join("config.toml")).unwrap();
    let broken =
        text.replace("\"Pitch Battery Fault\", \"Hydraulic Leak\"", "\"Pitch Battery Fault\", \"Hydraulic Leek\"");
    assert!(text != broken);
    std::fs::create_dir(tmp.path().join("prompts")).unwrap();
    std::fs::copy(sample_data().join("prompts/classify.txt"), tmp.path().join("prompts/classify.txt")).unwrap();
    std::fs::write(tmp.path().join("config.toml"), broken).unwrap();
    let out = maintbench(tmp.path(), &["validate-config", "--config", "config.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("Hydraulic Leek"));
}

#[test]
fn hosted_model_without_key_fails_before_any_request() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, dataset) =
        write_planted(tmp.path(), 3, &[("alpha", (1..=3).map(|i| legal_line(i, "high")).collect())]);
    let mut text = std::fs::read_to_string(&config).unwrap();
    text.push_str(
        "\n[[models]]\nmodel_id = \"hosted\"\nprovider_kind = \"openai_compatible\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\n\
         auth = \"MAINTBENCH_TEST_UNSET_KEY\"\nprice_in = \"1\"\nprice_out = \"1\"\n",
    );
    // models are appended after [run], so move the run table last
    let text = text.replace("[run]\nruns_dir = \"runs\"\n", "") + "\n[run]\nruns_dir = \"runs\"\n";
    std::fs::write(&config, text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_maintbench"))
        .args(["run", "--dataset", dataset.to_str().unwrap(), "--config", config.to_str().unwrap()])
        .current_dir(tmp.path())
        .env_remove("MAINTBENCH_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let msg = stderr_json(&out)["message"].as_str().unwrap().to_string();
    assert!(msg.contains("MAINTBENCH_TEST_UNSET_KEY") && msg.contains("hosted"), "{msg}");
    assert!(!tmp.path().join("runs").exists() || std::fs::read_dir(tmp.path().join("runs")).unwrap().next().is_none());
}

#[test]
fn analyze_is_idempotent_and_leaves_the_archive_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let run = curate_and_run(tmp.path());
    let run_id = run.file_name().unwrap().to_str().unwrap().to_string();
    let before = snapshot(&run);
    assert!(std::fs::metadata(run.join("run.json")).unwrap().permissions().readonly());

    let out = maintbench(tmp.path(), &["analyze", "--run", &run_id, "--truth", "benchmark:mock-absent"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("mock-absent"));
    let out = maintbench(tmp.path(), &["analyze", "--run", &run_id, "--truth", "human"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("no reviewed logs yet"));

    let mut first = None;
    for _ in 0..2 {
        let out = maintbench(tmp.path(), &["analyze", "--run", &run_id, "--truth", "consensus"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let metrics = std::fs::read(tmp.path().join(&stdout_paths(&out)[0])).unwrap();
        assert_eq!(*first.get_or_insert(metrics.clone()), metrics);
    }
    for format in ["table", "data", "text"] {
        let out = maintbench(tmp.path(), &["report", "--run", &run_id, "--format", format]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let summary = std::fs::read_to_string(tmp.path().join(format!("reports/{run_id}/consensus/summary.csv"))).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert_eq!(snapshot(&run), before);
}

fn outcomes(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            let obj = v.as_object_mut().unwrap();
            obj.remove("latency");
            obj.remove("usage");
            v
        })
        .collect()
}

#[cfg(unix)]
fn make_writable(dir: &Path) {
    use std::os::unix::fs::PermissionsExt;
    for p in snapshot(dir).keys() {
        std::fs::set_permissions(dir.join(p), std::fs::Permissions::from_mode(0o644)).unwrap();
    }
}

#[cfg(unix)]
#[test]
fn interrupted_run_resumes_from_its_archive() {
    let tmp = tempfile::tempdir().unwrap();
    let run = curate_and_run(tmp.path());
    let run_id = run.file_name().unwrap().to_str().unwrap().to_string();
    let results = run.join("results/mock-gamma.jsonl");
    let complete = outcomes(&results);

    // simulate a crash mid-way through mock-gamma
    make_writable(&run);
    let text = std::fs::read_to_string(&results).unwrap();
    let head: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
    std::fs::write(&results, format!("{head}{{\"log_id\":\"log-0")).unwrap();
    let mut manifest: Value = serde_json::from_str(&std::fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    manifest["status"] = "running".into();
    manifest["wall_clock"].as_object_mut().unwrap().remove("mock-gamma");
    std::fs::write(run.join("run.json"), manifest.to_string()).unwrap();

    let out = maintbench(tmp.path(), &["run", "--resume", &run_id]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(outcomes(&results), complete);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "finalized");
    assert_eq!(manifest["resumed_models"], serde_json::json!(["mock-gamma"]));
    let errors = std::fs::read_to_string(run.join("errors.jsonl")).unwrap();
    assert_eq!(errors.lines().count(), 3);

    let out = maintbench(tmp.path(), &["run", "--resume", &run_id]);
    assert_eq!(out.status.code(), Some(1));
    let out = maintbench(tmp.path(), &["analyze", "--run", &run_id, "--truth", "benchmark:mock-alpha"]);
    assert!(out.status.success());
    let metrics = std::fs::read_to_string(tmp.path().join(&stdout_paths(&out)[0])).unwrap();
    assert!(metrics.contains("resumed"));
}

#[test]
fn translated_dataset_keeps_its_originals() {
    let tmp = tempfile::tempdir().unwrap();
    let pt = sample_data().join("sample_logs_pt.csv");
    let out = maintbench(
        tmp.path(),
        &["translate", "--in", pt.to_str().unwrap(), "--out", "en.csv", "--config", &sample_config()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("en.translation.json")).unwrap()).unwrap();
    assert_eq!(report["translated"], 3);
    assert_eq!(report["already_english"], 1);
    let translated = std::fs::read_to_string(tmp.path().join("en.csv")).unwrap();
    assert!(translated.lines().skip(1).all(|l| l.contains(",en,")));

    // the fixtures only cover the English sample, so use the echo model as classifier
    let out = maintbench(
        tmp.path(),
        &["run", "--dataset", "en.csv", "--config", &sample_config(), "--models", "echo-translator"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join(&stdout_paths(&out)[0]);
    let originals = std::fs::read_to_string(run.join("dataset.originals.csv")).unwrap();
    assert!(originals.contains("Bateria do pitch"));
    let errors = std::fs::read_to_string(run.join("errors.jsonl")).unwrap();
    assert_eq!(errors.lines().count(), 4);
}
