//! The `analyze` stage and the report formats built from its output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use maintbench_core::metrics::KappaMatrix;
use maintbench_core::report::{build_report, kappa_band, MetricsReport, KAPPA_HIGH, KAPPA_SUBSTANTIAL};
use maintbench_core::{GroundTruthSource, Task};
use rust_decimal::{Decimal, RoundingStrategy};

use crate::archive::{Archive, RunStatus};
use crate::error::{Error, IoContext, Result};

pub const METRICS_FILE: &str = "metrics.json";
pub const LATEST_FILE: &str = "latest";

/// The seven summary columns.
pub const TABLE_COLUMNS: [&str; 7] = [
    "Model",
    "Throughput (logs/s)",
    "Total Tokens",
    "Est. Cost ($)",
    "Error Rate (%)",
    "Average F1 Score",
    "Average Consensus",
];

pub const NA: &str = "n/a";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Data,
    Text,
}

/// Directory-safe name of a truth source.
pub fn truth_tag(source: &GroundTruthSource) -> String {
    match source {
        GroundTruthSource::BenchmarkModel(id) => format!("benchmark-{id}"),
        GroundTruthSource::Consensus => "consensus".into(),
        GroundTruthSource::HumanVerified => "human".into(),
    }
}

/// Computes metrics for a finalized run.
pub fn compute_metrics(archive: &Archive, truth: &GroundTruthSource) -> Result<MetricsReport> {
    if archive.manifest.status != RunStatus::Finalized {
        return Err(Error::Usage(format!("run {} is not finalized; resume it first", archive.run_id())));
    }
    let config = archive.config()?;
    let models = archive.model_results()?;
    let reviews = archive.reviews()?;
    let configs: Vec<_> = archive.manifest.models.iter().filter_map(|id| config.model(id).cloned()).collect();
    let mut report = build_report(&models, &configs, &config.schema, &reviews, truth)?;
    if !archive.manifest.resumed_models.is_empty() {
        report.notes.push(format!(
            "Throughput for {} spans a resumed session and is approximate.",
            archive.manifest.resumed_models.join(", ")
        ));
    }
    if archive.manifest.cross_model_parallel {
        report.notes.push("Models ran concurrently; throughput reflects contention between them.".into());
    }
    Ok(report)
}

/// Writes `reports_dir/<run_id>/<truth>/metrics.json` and returns its path.
pub fn analyze(run_dir: &Path, truth: &GroundTruthSource, reports_dir: &Path) -> Result<PathBuf> {
    let archive = Archive::open(run_dir)?;
    let report = compute_metrics(&archive, truth)?;
    let run_reports = reports_dir.join(archive.run_id());
    let dir = run_reports.join(truth_tag(truth));
    std::fs::create_dir_all(&dir).at(&dir)?;
    let path = dir.join(METRICS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n").at(&path)?;
    std::fs::write(run_reports.join(LATEST_FILE), truth_tag(truth) + "\n").at(run_reports.join(LATEST_FILE))?;
    Ok(path)
}

/// Renders the latest (or the named) analysis of a run.
pub fn report(
    run_dir: &Path,
    reports_dir: &Path,
    truth: Option<&GroundTruthSource>,
    format: Format,
) -> Result<PathBuf> {
    let archive = Archive::open(run_dir)?;
    let run_reports = reports_dir.join(archive.run_id());
    let tag = match truth {
        Some(t) => truth_tag(t),
        None => {
            let p = run_reports.join(LATEST_FILE);
            std::fs::read_to_string(&p)
                .map_err(|_| Error::Usage(format!("run {} has not been analyzed yet", archive.run_id())))?
                .trim()
                .to_string()
        }
    };
    let dir = run_reports.join(&tag);
    let metrics = dir.join(METRICS_FILE);
    let text = std::fs::read_to_string(&metrics)
        .map_err(|_| Error::Usage(format!("no analysis for truth {tag:?}; run `analyze` first")))?;
    let report: MetricsReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: metrics.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let (name, body) = match format {
        Format::Table => {
            for (file, body) in
                [("kappa.csv", render_kappa_csv(&report)), ("calibration.csv", render_calibration_csv(&report))]
            {
                std::fs::write(dir.join(file), body).at(dir.join(file))?;
            }
            ("summary.csv", render_table(&report))
        }
        Format::Data => ("report.json", serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        Format::Text => ("report.txt", render_text(&report)),
    };
    let path = dir.join(name);
    std::fs::write(&path, body).at(&path)?;
    Ok(path)
}

pub fn fmt2(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.2}"))
}

pub fn fmt_cost(c: Option<Decimal>) -> String {
    c.map_or_else(
        || NA.to_string(),
        |d| format!("{:.2}", d.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero)),
    )
}

pub fn fmt_percent(v: Option<f64>) -> String {
    fmt2(v.map(|r| r * 100.0))
}

fn csv_line(cells: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(cells).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// One row per model, cells as printed.
pub fn table_rows(report: &MetricsReport) -> Vec<[String; 7]> {
    report
        .models
        .iter()
        .map(|m| {
            let mut f1 = fmt2(m.average_f1);
            if m.self_reference && m.average_f1.is_some() {
                f1.push('*');
            }
            [
                m.model_id.clone(),
                fmt2(m.throughput),
                m.total_tokens.to_string(),
                fmt_cost(m.cost),
                fmt_percent(m.error_rate),
                f1,
                fmt2(m.average_consensus),
            ]
        })
        .collect()
}

pub fn render_table(report: &MetricsReport) -> String {
    let mut out = csv_line(&TABLE_COLUMNS.map(String::from));
    for row in table_rows(report) {
        out.push_str(&csv_line(&row));
    }
    out
}

fn kappa_rows(name: &str, m: &KappaMatrix, out: &mut String) {
    for (i, a) in m.model_ids.iter().enumerate() {
        for (j, b) in m.model_ids.iter().enumerate() {
            out.push_str(&csv_line(&[
                name.into(),
                a.clone(),
                b.clone(),
                m.get(i, j).map_or(NA.into(), |k| format!("{k:.4}")),
            ]));
        }
    }
}

pub fn render_kappa_csv(report: &MetricsReport) -> String {
    let mut out = csv_line(&["task", "model_a", "model_b", "kappa"].map(String::from));
    if let Some(k) = &report.kappa {
        kappa_rows(Task::MaintenanceType.as_str(), &k.maintenance_type, &mut out);
        kappa_rows(Task::IssueCategory.as_str(), &k.issue_category, &mut out);
        kappa_rows("average", &k.average, &mut out);
    }
    out
}

pub fn render_calibration_csv(report: &MetricsReport) -> String {
    let mut out = csv_line(&["model", "task", "confidence", "n", "weighted_f1"].map(String::from));
    for t in &report.calibration {
        for r in &t.rows {
            out.push_str(&csv_line(&[
                t.model_id.clone(),
                t.task.as_str().into(),
                r.confidence.as_str().into(),
                r.n.to_string(),
                fmt2(r.weighted_f1),
            ]));
        }
    }
    out
}

fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn kappa_block(title: &str, m: &KappaMatrix, out: &mut String) {
    let _ = writeln!(out, "{title}");
    let mut rows = vec![std::iter::once(String::new()).chain(m.model_ids.iter().cloned()).collect::<Vec<_>>()];
    for (i, a) in m.model_ids.iter().enumerate() {
        let mut r = vec![a.clone()];
        r.extend((0..m.model_ids.len()).map(|j| m.get(i, j).map_or(NA.into(), |k| format!("{k:.2}"))));
        rows.push(r);
    }
    out.push_str(&aligned(&rows));
    out.push('\n');
}

pub fn render_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Ground truth: {}", report.truth_source);
    let _ = writeln!(out, "Label schema: {}", report.schema_version);
    let _ = writeln!(
        out,
        "Truth labels: {} maintenance type, {} issue category",
        report.truth_size.get(&Task::MaintenanceType).unwrap_or(&0),
        report.truth_size.get(&Task::IssueCategory).unwrap_or(&0)
    );
    out.push('\n');

    let mut rows = vec![TABLE_COLUMNS.map(String::from).to_vec()];
    rows.extend(table_rows(report).into_iter().map(|r| r.to_vec()));
    out.push_str(&aligned(&rows));
    out.push('\n');

    let _ = writeln!(out, "Per task");
    let mut rows =
        vec![["Model", "Task", "Evaluated", "Accuracy", "Weighted F1", "Consensus"].map(String::from).to_vec()];
    for m in &report.models {
        for (task, t) in [(Task::MaintenanceType, &m.maintenance_type), (Task::IssueCategory, &m.issue_category)] {
            rows.push(vec![
                m.model_id.clone(),
                task.as_str().into(),
                t.evaluated.to_string(),
                fmt2(t.accuracy),
                fmt2(t.weighted_f1),
                fmt2(t.agreement),
            ]);
        }
    }
    out.push_str(&aligned(&rows));
    out.push('\n');

    let _ = writeln!(out, "Errors");
    let mut rows =
        vec![["Model", "N", "Failed", "Hallucinated", "Kinds", "Estimated usage"].map(String::from).to_vec()];
    for m in &report.models {
        let kinds: Vec<String> = m.failures_by_kind.iter().map(|(k, n)| format!("{}={n}", k.as_str())).collect();
        rows.push(vec![
            m.model_id.clone(),
            m.n_total.to_string(),
            m.n_fail.to_string(),
            m.n_hall.to_string(),
            if kinds.is_empty() { "-".into() } else { kinds.join(" ") },
            m.estimated_usage.to_string(),
        ]);
    }
    out.push_str(&aligned(&rows));
    out.push('\n');

    match &report.kappa {
        Some(k) => {
            let _ = writeln!(
                out,
                "Cohen's kappa (> {KAPPA_HIGH:.2} high agreement, {KAPPA_SUBSTANTIAL:.2}-0.80 substantial)\n"
            );
            kappa_block("Maintenance type", &k.maintenance_type, &mut out);
            kappa_block("Issue category", &k.issue_category, &mut out);
            kappa_block("Average", &k.average, &mut out);
            let ids = &k.average.model_ids;
            for i in 0..ids.len() {
                for j in (i + 1)..ids.len() {
                    if let Some(v) = k.average.get(i, j) {
                        let _ = writeln!(out, "  {} / {}: {v:.2} ({})", ids[i], ids[j], kappa_band(v));
                    }
                }
            }
            out.push('\n');
        }
        None => {
            let _ = writeln!(out, "Cohen's kappa: {NA} (needs at least two models)\n");
        }
    }

    let _ = writeln!(out, "Calibration (weighted F1 by stated confidence)");
    let mut rows = vec![["Model", "Task", "Confidence", "N", "Weighted F1"].map(String::from).to_vec()];
    for t in &report.calibration {
        for r in &t.rows {
            rows.push(vec![
                t.model_id.clone(),
                t.task.as_str().into(),
                r.confidence.as_str().into(),
                r.n.to_string(),
                fmt2(r.weighted_f1),
            ]);
        }
    }
    out.push_str(&aligned(&rows));
    out.push('\n');

    let _ = writeln!(out, "Notes");
    for n in &report.notes {
        let _ = writeln!(out, "- {n}");
    }
    out
}
