#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use maintbench::config::load_config;
use maintbench::dataset::read_logs;
use maintbench::runner::{run_benchmark, select_models};
use serde_json::{json, Value};

pub const MAINTENANCE: [&str; 4] = ["Inspection", "Repair", "Replacement", "Cleaning"];
pub const ISSUES: [&str; 5] = ["Blade Damage", "Hydraulic Leak", "Oil Contamination", "Sensor Fault", "Other"];

/// Hydraulic logs only admit three issue categories.
pub const HYDRAULIC_ISSUES: [&str; 3] = ["Hydraulic Leak", "Oil Contamination", "Other"];

pub fn sample_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn log_id(i: usize) -> String {
    format!("log-{i:06}")
}

/// Component of the i-th planted log: every third one is hydraulic.
pub fn component(i: usize) -> &'static str {
    if i.is_multiple_of(3) {
        "MDX10"
    } else {
        "MDA10"
    }
}

pub fn ok_line(i: usize, mt: &str, ic: &str, confidence: &str) -> Value {
    json!({
        "log_id": log_id(i),
        "raw_text": json!({"maintenance_type": mt, "issue_category": ic, "confidence": confidence}).to_string(),
        "tokens_in": 100,
        "tokens_out": 20,
        "latency_ms": 250,
    })
}

/// A well-formed answer that is legal for the planted log's component.
pub fn legal_line(i: usize, confidence: &str) -> Value {
    let ic = if component(i) == "MDX10" { HYDRAULIC_ISSUES[i % 3] } else { ISSUES[i % 5] };
    ok_line(i, MAINTENANCE[i % 4], ic, confidence)
}

/// Writes a dataset of `n` logs, a config and one fixture per model.
/// Returns (config path, dataset path).
pub fn write_planted(dir: &Path, n: usize, models: &[(&str, Vec<Value>)]) -> (PathBuf, PathBuf) {
    let mut csv = String::from("Component Code,Component Name,Log Description,Additional Observations\n");
    for i in 1..=n {
        let (code, name) =
            if component(i) == "MDX10" { ("MDX10", "central hydr. syst") } else { ("MDA10", "Rotor Blades") };
        writeln!(csv, "{code},{name},Planted work order number {i},Observation {i}").unwrap();
    }
    let dataset = dir.join("dataset.csv");
    std::fs::write(&dataset, csv).unwrap();

    let list = |v: &[&str]| format!("[{}]", v.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", "));
    let mut cfg = format!(
        "[schema]\nschema_version = \"planted-1\"\nmaintenance_types = {}\nissue_categories = {}\n\n\
         [components]\nMDA10 = \"Rotor Blades\"\nMDX10 = \"Central Hydraulic System\"\n\n\
         [label_map.default_rule]\nmaintenance = {{ exclude = [] }}\nissue = {{ exclude = [] }}\n\n\
         [label_map.components.MDX10]\nmaintenance = {{ exclude = [] }}\nissue = {{ include = {} }}\n\n",
        list(&MAINTENANCE),
        list(&ISSUES),
        list(&HYDRAULIC_ISSUES),
    );
    for (id, lines) in models {
        let fixture = dir.join(format!("{id}.jsonl"));
        let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
        std::fs::write(&fixture, body).unwrap();
        write!(
            cfg,
            "[[models]]\nmodel_id = \"{id}\"\nprovider_kind = \"mock\"\nendpoint = \"{id}.jsonl\"\n\
             price_in = \"1.25\"\nprice_out = \"10\"\nmax_parallel = 4\nmax_retries = 2\n\
             requests_per_minute = 600\nbackoff_base_ms = 100\n\n"
        )
        .unwrap();
    }
    cfg.push_str("[dedup]\nenabled = false\n\n[run]\nruns_dir = \"runs\"\n");
    let config = dir.join("config.toml");
    std::fs::write(&config, cfg).unwrap();
    (config, dataset)
}

/// Runs every configured model over the dataset on a paused clock.
pub fn run_planted(config: &Path, dataset: &Path, runs_dir: &Path) -> PathBuf {
    let config = load_config(config).unwrap();
    let logs = read_logs(dataset, "en").unwrap().logs;
    let models = select_models(&config, None).unwrap();
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .start_paused(true)
        .build()
        .unwrap()
        .block_on(run_benchmark(&config, &logs, models, runs_dir))
        .unwrap()
}
