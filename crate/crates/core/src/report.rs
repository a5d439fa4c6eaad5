//! Per-model summary rows, kappa matrices and calibration tables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::metrics::{
    agreement_score, calibration_table, compute_cost, consensus_labels, error_rate, kappa_matrix, score_task,
    select_ground_truth, throughput, CalibrationRow, KappaMatrix, MetricsError,
};
use crate::model::{FailureKind, GroundTruthSource, LabelSchema, ModelConfig, ModelResults, ReviewRecord, Task};

/// Kappa at or above this value reads as high agreement.
pub const KAPPA_HIGH: f64 = 0.81;
/// Kappa at or above this value (and below high) reads as substantial.
pub const KAPPA_SUBSTANTIAL: f64 = 0.61;

pub fn kappa_band(k: f64) -> &'static str {
    if k > KAPPA_HIGH {
        "high agreement"
    } else if k >= KAPPA_SUBSTANTIAL {
        "substantial"
    } else {
        "below substantial"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub evaluated: usize,
    pub accuracy: Option<f64>,
    pub weighted_f1: Option<f64>,
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model_id: String,
    pub n_total: usize,
    pub wall_clock: f64,
    pub throughput: Option<f64>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub total_tokens: u64,
    /// Requests whose usage had to be estimated.
    pub estimated_usage: usize,
    pub cost: Option<Decimal>,
    pub n_fail: usize,
    pub n_hall: usize,
    pub failures_by_kind: BTreeMap<FailureKind, usize>,
    pub error_rate: Option<f64>,
    pub maintenance_type: TaskMetrics,
    pub issue_category: TaskMetrics,
    pub average_f1: Option<f64>,
    pub average_consensus: Option<f64>,
    /// Scored against its own output.
    pub self_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSet {
    pub maintenance_type: KappaMatrix,
    pub issue_category: KappaMatrix,
    pub average: KappaMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub model_id: String,
    pub task: Task,
    pub rows: Vec<CalibrationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub truth_source: String,
    pub schema_version: String,
    pub models: Vec<ModelRow>,
    pub truth_size: BTreeMap<Task, usize>,
    pub consensus_excluded: BTreeMap<Task, usize>,
    pub kappa: Option<KappaSet>,
    pub calibration: Vec<CalibrationTable>,
    pub notes: Vec<String>,
}

fn mean2(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some((a? + b?) / 2.0)
}

/// Builds the full report. Fails only when the ground truth cannot be
/// selected; every other gap becomes an unavailable cell.
pub fn build_report(
    models: &[ModelResults],
    configs: &[ModelConfig],
    schema: &LabelSchema,
    reviews: &[ReviewRecord],
    truth_source: &GroundTruthSource,
) -> Result<MetricsReport, MetricsError> {
    let truth = select_ground_truth(models, truth_source, reviews)?;
    let multi = models.len() >= 2;
    let consensus: BTreeMap<Task, _> = Task::ALL.iter().map(|&t| (t, consensus_labels(models, t))).collect();

    let mut rows = Vec::with_capacity(models.len());
    let mut calibration = Vec::new();
    for m in models {
        let usage: Vec<_> = m.entries.iter().map(|e| e.usage).collect();
        let tokens_in: u64 = usage.iter().map(|u| u.tokens_in).sum();
        let tokens_out: u64 = usage.iter().map(|u| u.tokens_out).sum();
        let errors = error_rate(m, reviews);
        let task = |t: Task| {
            let s = score_task(m, &truth, t, schema.taxonomy(t));
            let agreement = if multi { agreement_score(m, &consensus[&t].labels, t) } else { None };
            TaskMetrics { evaluated: s.evaluated, accuracy: s.accuracy, weighted_f1: s.weighted_f1, agreement }
        };
        let mt = task(Task::MaintenanceType);
        let ic = task(Task::IssueCategory);
        for t in Task::ALL {
            calibration.push(CalibrationTable {
                model_id: m.model_id.clone(),
                task: t,
                rows: calibration_table(m, &truth, t, schema.taxonomy(t)),
            });
        }
        rows.push(ModelRow {
            model_id: m.model_id.clone(),
            n_total: m.entries.len(),
            wall_clock: m.wall_clock,
            throughput: throughput(m.entries.len(), m.wall_clock),
            tokens_in,
            tokens_out,
            total_tokens: tokens_in + tokens_out,
            estimated_usage: usage.iter().filter(|u| u.estimated).count(),
            cost: configs.iter().find(|c| c.model_id == m.model_id).map(|c| compute_cost(&usage, c)),
            n_fail: errors.n_fail,
            n_hall: errors.n_hall,
            failures_by_kind: errors.by_kind,
            error_rate: errors.rate,
            average_f1: mean2(mt.weighted_f1, ic.weighted_f1),
            average_consensus: mean2(mt.agreement, ic.agreement),
            maintenance_type: mt,
            issue_category: ic,
            self_reference: matches!(truth_source, GroundTruthSource::BenchmarkModel(id) if *id == m.model_id),
        });
    }

    let kappa = multi.then(|| {
        let mt = kappa_matrix(models, Task::MaintenanceType);
        let ic = kappa_matrix(models, Task::IssueCategory);
        let average = KappaMatrix::average(&[mt.clone(), ic.clone()]).expect("two matrices");
        KappaSet { maintenance_type: mt, issue_category: ic, average }
    });

    let mut notes = alloc::vec![
        "Average F1 is the mean of the two tasks' support-weighted F1; logs where the model failed are excluded."
            .to_string(),
        "Average Consensus is the mean of the two tasks' agreement with the per-log mode; failed logs count as non-matching."
            .to_string(),
        "Error Rate counts failure records plus reviewer-confirmed hallucinations, each log at most once.".to_string(),
        alloc::format!(
            "Kappa above {KAPPA_HIGH} indicates high agreement; {KAPPA_SUBSTANTIAL}-0.80 is substantial."
        ),
    ];
    if !multi {
        notes.push("Consensus and kappa need at least two models and are unavailable.".to_string());
    }
    if rows.iter().any(|r| r.self_reference) {
        notes.push("* Benchmark model scored against its own output (self-referential).".to_string());
    }

    Ok(MetricsReport {
        truth_source: truth_source.to_string(),
        schema_version: schema.schema_version.clone(),
        models: rows,
        truth_size: Task::ALL.iter().map(|&t| (t, truth.for_task(t).len())).collect(),
        consensus_excluded: consensus.iter().map(|(t, c)| (*t, c.excluded.len())).collect(),
        kappa,
        calibration,
        notes,
    })
}
