//! Alignment, agreement, calibration, cost and reliability metrics.
//!
//! All functions are pure over finalized results. Undefined values are
//! returned as `None` rather than zero so reports can mark them unavailable.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{
    Confidence, FailureKind, GroundTruthSource, ModelConfig, ModelResults, ReviewRecord, Task, TokenUsage, Verdict,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("model {0:?} is not part of the run")]
    UnknownModel(String),
    #[error("no reviewed logs yet: human-verified truth needs at least one accepted or corrected review")]
    NoReviews,
    #[error("the two models share no log with a valid output")]
    EmptyCommonSet,
    #[error("label {0:?} is outside the label set")]
    LabelOutsideSet(String),
    #[error("predictions ({0}) and truth ({1}) differ in length")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub label: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// One-vs-rest counts per label for a multiclass task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub task: Task,
    pub evaluated: usize,
    pub labels: Vec<LabelCounts>,
}

pub fn confusion_counts(
    predictions: &[&str],
    truth: &[&str],
    labelset: &[String],
    task: Task,
) -> Result<ConfusionCounts, MetricsError> {
    if predictions.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), truth.len()));
    }
    let index: BTreeMap<&str, usize> = labelset.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let lookup = |l: &str| index.get(l).copied().ok_or_else(|| MetricsError::LabelOutsideSet(l.to_string()));
    let mut labels: Vec<LabelCounts> =
        labelset.iter().map(|l| LabelCounts { label: l.clone(), tp: 0, fp: 0, fn_: 0, tn: 0 }).collect();
    for (p, t) in predictions.iter().zip(truth) {
        let (pi, ti) = (lookup(p)?, lookup(t)?);
        if pi == ti {
            labels[pi].tp += 1;
        } else {
            labels[pi].fp += 1;
            labels[ti].fn_ += 1;
        }
    }
    let n = predictions.len();
    for c in &mut labels {
        c.tn = n - c.tp - c.fp - c.fn_;
    }
    Ok(ConfusionCounts { task, evaluated: n, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Summary {
    pub per_label: Vec<LabelScore>,
    /// Support-weighted mean of per-label F1; `None` when nothing is supported.
    pub weighted_f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-label precision, recall and F1 with the 0/0 → 0 convention.
pub fn precision_recall_f1(counts: &ConfusionCounts) -> F1Summary {
    let per_label: Vec<LabelScore> = counts
        .labels
        .iter()
        .map(|c| {
            let precision = ratio(c.tp, c.tp + c.fp);
            let recall = ratio(c.tp, c.tp + c.fn_);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            LabelScore { label: c.label.clone(), precision, recall, f1, support: c.tp + c.fn_ }
        })
        .collect();
    let total: usize = per_label.iter().map(|s| s.support).sum();
    let weighted_f1 =
        (total > 0).then(|| per_label.iter().map(|s| s.support as f64 * s.f1).sum::<f64>() / total as f64);
    F1Summary { per_label, weighted_f1 }
}

/// Fraction of positions where prediction equals truth.
pub fn accuracy(predictions: &[&str], truth: &[&str]) -> Option<f64> {
    if predictions.is_empty() || predictions.len() != truth.len() {
        return None;
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Some(hits as f64 / predictions.len() as f64)
}

/// Mode of the votes. Ties go to the highest mean confidence, then to the
/// lexicographically smallest label. Needs at least two votes.
pub fn consensus_label(votes: &[(&str, Confidence)]) -> Option<String> {
    if votes.len() < 2 {
        return None;
    }
    // label -> (count, confidence weight sum)
    let mut tally: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for (label, conf) in votes {
        let e = tally.entry(label).or_default();
        e.0 += 1;
        e.1 += conf.weight();
    }
    let mut best: Option<(&str, u32, u32)> = None;
    // BTreeMap iterates in ascending label order, so strict comparisons keep
    // the smallest label on full ties.
    for (label, (count, weight)) in tally {
        let better = match best {
            None => true,
            Some((_, bc, bw)) => {
                // mean confidences compared by cross-multiplying
                count > bc || (count == bc && u64::from(weight) * u64::from(bc) > u64::from(bw) * u64::from(count))
            }
        };
        if better {
            best = Some((label, count, weight));
        }
    }
    best.map(|(l, _, _)| l.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Consensus {
    pub labels: BTreeMap<String, String>,
    /// Logs with fewer than two valid outputs.
    pub excluded: Vec<String>,
}

fn all_log_ids(models: &[ModelResults]) -> BTreeSet<&str> {
    models.iter().flat_map(|m| m.entries.iter().map(|e| e.log_id.as_str())).collect()
}

pub fn consensus_labels(models: &[ModelResults], task: Task) -> Consensus {
    let mut votes: BTreeMap<&str, Vec<(&str, Confidence)>> = BTreeMap::new();
    for m in models {
        for (log_id, out) in m.outputs() {
            votes.entry(log_id).or_default().push((out.label(task), out.confidence));
        }
    }
    let mut c = Consensus::default();
    for log_id in all_log_ids(models) {
        match votes.get(log_id).and_then(|v| consensus_label(v)) {
            Some(label) => {
                c.labels.insert(log_id.to_string(), label);
            }
            None => c.excluded.push(log_id.to_string()),
        }
    }
    c
}

/// Share of consensus-labelled logs where the model's label matches. A failed
/// log counts as a mismatch.
pub fn agreement_score(model: &ModelResults, consensus: &BTreeMap<String, String>, task: Task) -> Option<f64> {
    let mut n = 0usize;
    let mut hits = 0usize;
    for e in &model.entries {
        let Some(con) = consensus.get(&e.log_id) else { continue };
        n += 1;
        if e.outcome.output().is_some_and(|o| o.label(task) == con) {
            hits += 1;
        }
    }
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Cohen's kappa between two aligned label sequences. When chance agreement
/// is 1 (both raters constant and equal) kappa is defined as 1.
pub fn cohens_kappa(a: &[&str], b: &[&str]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyCommonSet);
    }
    // exact integer counts; one rounding at the final division
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut marg: BTreeMap<&str, (u128, u128)> = BTreeMap::new();
    for x in a {
        marg.entry(x).or_default().0 += 1;
    }
    for y in b {
        marg.entry(y).or_default().1 += 1;
    }
    let chance: u128 = marg.values().map(|&(ca, cb)| ca * cb).sum();
    if chance == n * n {
        return Ok(1.0);
    }
    let num = (n * agree) as i128 - chance as i128;
    Ok(num as f64 / (n * n - chance) as f64)
}

/// Kappa over logs where both models produced a valid output.
pub fn pairwise_kappa(a: &ModelResults, b: &ModelResults, task: Task) -> Result<f64, MetricsError> {
    let b_out: BTreeMap<&str, &str> = b.outputs().map(|(id, o)| (id, o.label(task))).collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (id, o) in a.outputs() {
        if let Some(y) = b_out.get(id) {
            xs.push(o.label(task));
            ys.push(*y);
        }
    }
    cohens_kappa(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaMatrix {
    pub model_ids: Vec<String>,
    /// Row-major, `None` where kappa is unavailable.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl KappaMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j]
    }

    /// Cell-wise arithmetic mean; a cell is unavailable if any input lacks it.
    pub fn average(matrices: &[KappaMatrix]) -> Option<KappaMatrix> {
        let first = matrices.first()?;
        let k = first.model_ids.len();
        let mut cells = alloc::vec![alloc::vec![None; k]; k];
        for (i, row) in cells.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let vals: Option<Vec<f64>> = matrices.iter().map(|m| m.get(i, j)).collect();
                *cell = vals.map(|v| v.iter().sum::<f64>() / v.len() as f64);
            }
        }
        Some(KappaMatrix { model_ids: first.model_ids.clone(), cells })
    }
}

pub fn kappa_matrix(models: &[ModelResults], task: Task) -> KappaMatrix {
    let k = models.len();
    let mut cells = alloc::vec![alloc::vec![None; k]; k];
    for i in 0..k {
        cells[i][i] = Some(1.0);
        for j in (i + 1)..k {
            let v = pairwise_kappa(&models[i], &models[j], task).ok();
            cells[i][j] = v;
            cells[j][i] = v;
        }
    }
    KappaMatrix { model_ids: models.iter().map(|m| m.model_id.clone()).collect(), cells }
}

/// Reference labels per task, keyed by log id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub source: GroundTruthSource,
    pub maintenance_type: BTreeMap<String, String>,
    pub issue_category: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn for_task(&self, task: Task) -> &BTreeMap<String, String> {
        match task {
            Task::MaintenanceType => &self.maintenance_type,
            Task::IssueCategory => &self.issue_category,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.maintenance_type.is_empty() && self.issue_category.is_empty()
    }
}

/// Latest review per (model, log); later records in the slice win.
pub fn latest_reviews(reviews: &[ReviewRecord]) -> BTreeMap<(&str, &str), (usize, &ReviewRecord)> {
    let mut out = BTreeMap::new();
    for (i, r) in reviews.iter().enumerate() {
        out.insert((r.model_id.as_str(), r.log_id.as_str()), (i, r));
    }
    out
}

pub fn select_ground_truth(
    models: &[ModelResults],
    source: &GroundTruthSource,
    reviews: &[ReviewRecord],
) -> Result<GroundTruth, MetricsError> {
    let mut truth =
        GroundTruth { source: source.clone(), maintenance_type: BTreeMap::new(), issue_category: BTreeMap::new() };
    match source {
        GroundTruthSource::BenchmarkModel(id) => {
            let m = models.iter().find(|m| &m.model_id == id).ok_or_else(|| MetricsError::UnknownModel(id.clone()))?;
            for (log_id, out) in m.outputs() {
                truth.maintenance_type.insert(log_id.to_string(), out.maintenance_type.clone());
                truth.issue_category.insert(log_id.to_string(), out.issue_category.clone());
            }
        }
        GroundTruthSource::Consensus => {
            truth.maintenance_type = consensus_labels(models, Task::MaintenanceType).labels;
            truth.issue_category = consensus_labels(models, Task::IssueCategory).labels;
        }
        GroundTruthSource::HumanVerified => {
            // per log, the most recent accepted or corrected verdict across models
            let mut chosen: BTreeMap<&str, (usize, String, String)> = BTreeMap::new();
            for ((model_id, log_id), (idx, r)) in latest_reviews(reviews) {
                let labels = match r.verdict {
                    Verdict::Corrected => {
                        r.corrected_labels.as_ref().map(|p| (p.maintenance_type.clone(), p.issue_category.clone()))
                    }
                    Verdict::Accepted => models
                        .iter()
                        .find(|m| m.model_id == model_id)
                        .and_then(|m| m.output_for(log_id))
                        .map(|o| (o.maintenance_type.clone(), o.issue_category.clone())),
                    Verdict::Hallucination => None,
                };
                let Some((mt, ic)) = labels else { continue };
                if chosen.get(log_id).is_none_or(|(prev, _, _)| idx > *prev) {
                    chosen.insert(log_id, (idx, mt, ic));
                }
            }
            if chosen.is_empty() {
                return Err(MetricsError::NoReviews);
            }
            for (log_id, (_, mt, ic)) in chosen {
                truth.maintenance_type.insert(log_id.to_string(), mt);
                truth.issue_category.insert(log_id.to_string(), ic);
            }
        }
    }
    Ok(truth)
}

/// Predictions and truth for logs where the model has a valid output and a
/// truth label exists.
fn aligned<'a>(
    model: &'a ModelResults,
    truth: &'a BTreeMap<String, String>,
    task: Task,
    bucket: Option<Confidence>,
) -> (Vec<&'a str>, Vec<&'a str>) {
    let (mut p, mut t) = (Vec::new(), Vec::new());
    for (log_id, out) in model.outputs() {
        if bucket.is_some_and(|b| b != out.confidence) {
            continue;
        }
        if let Some(label) = truth.get(log_id) {
            p.push(out.label(task));
            t.push(label.as_str());
        }
    }
    (p, t)
}

/// Labels in schema order, extended by any label seen in the data so that a
/// hand-corrected truth outside the taxonomy still counts.
fn label_universe(taxonomy: &[String], preds: &[&str], truth: &[&str]) -> Vec<String> {
    let mut labels: Vec<String> = taxonomy.to_vec();
    let known: BTreeSet<&str> = taxonomy.iter().map(String::as_str).collect();
    let extra: BTreeSet<&str> = preds.iter().chain(truth).copied().filter(|l| !known.contains(l)).collect();
    labels.extend(extra.into_iter().map(String::from));
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub evaluated: usize,
    pub accuracy: Option<f64>,
    pub weighted_f1: Option<f64>,
}

pub fn score_task(model: &ModelResults, truth: &GroundTruth, task: Task, taxonomy: &[String]) -> TaskScore {
    let (p, t) = aligned(model, truth.for_task(task), task, None);
    let labels = label_universe(taxonomy, &p, &t);
    let weighted_f1 = confusion_counts(&p, &t, &labels, task).ok().and_then(|c| precision_recall_f1(&c).weighted_f1);
    TaskScore { evaluated: p.len(), accuracy: accuracy(&p, &t), weighted_f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub confidence: Confidence,
    pub n: usize,
    /// `None` for an empty bucket.
    pub weighted_f1: Option<f64>,
}

pub fn calibration_table(
    model: &ModelResults,
    truth: &GroundTruth,
    task: Task,
    taxonomy: &[String],
) -> Vec<CalibrationRow> {
    Confidence::ALL
        .iter()
        .map(|&bucket| {
            let (p, t) = aligned(model, truth.for_task(task), task, Some(bucket));
            let labels = label_universe(taxonomy, &p, &t);
            let weighted_f1 = if p.is_empty() {
                None
            } else {
                confusion_counts(&p, &t, &labels, task).ok().and_then(|c| precision_recall_f1(&c).weighted_f1)
            };
            CalibrationRow { confidence: bucket, n: p.len(), weighted_f1 }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub n_total: usize,
    pub n_fail: usize,
    pub n_hall: usize,
    pub by_kind: BTreeMap<FailureKind, usize>,
    /// `(n_fail + n_hall) / n_total`.
    pub rate: Option<f64>,
}

/// Failure records plus confirmed hallucinations among valid outputs. Each
/// log contributes at most once.
pub fn error_rate(model: &ModelResults, reviews: &[ReviewRecord]) -> ErrorBreakdown {
    let latest = latest_reviews(reviews);
    let mut by_kind = BTreeMap::new();
    let mut n_fail = 0;
    let mut n_hall = 0;
    for e in &model.entries {
        match e.outcome.failure() {
            Some(f) => {
                n_fail += 1;
                *by_kind.entry(f.kind).or_default() += 1;
            }
            None => {
                let flagged = latest
                    .get(&(model.model_id.as_str(), e.log_id.as_str()))
                    .is_some_and(|(_, r)| r.verdict == Verdict::Hallucination);
                n_hall += usize::from(flagged);
            }
        }
    }
    let n_total = model.entries.len();
    let rate = (n_total > 0).then(|| (n_fail + n_hall) as f64 / n_total as f64);
    ErrorBreakdown { n_total, n_fail, n_hall, by_kind, rate }
}

const PER_MILLION: Decimal = Decimal::from_parts(1_000_000, 0, 0, false, 0);

/// `Σ (T_in · P_in + T_out · P_out)` with prices given per million tokens; the
/// division happens once, in decimal.
pub fn compute_cost<'a>(usage: impl IntoIterator<Item = &'a TokenUsage>, model: &ModelConfig) -> Decimal {
    let (tin, tout) = usage.into_iter().fold((0u64, 0u64), |(a, b), u| (a + u.tokens_in, b + u.tokens_out));
    (Decimal::from(tin) * model.price_in + Decimal::from(tout) * model.price_out) / PER_MILLION
}

/// Logs per second.
pub fn throughput(n: usize, total_seconds: f64) -> Option<f64> {
    (total_seconds > 0.0).then(|| n as f64 / total_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassificationOutput, FailureRecord, LabelPair, Outcome, ProviderKind, ResultEntry};
    use alloc::vec;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn confusion_example() {
        let c =
            confusion_counts(&["a", "b", "b"], &["a", "a", "b"], &labels(&["a", "b"]), Task::MaintenanceType).unwrap();
        assert_eq!((c.labels[0].tp, c.labels[0].fp, c.labels[0].fn_, c.labels[0].tn), (1, 0, 1, 1));
        assert_eq!((c.labels[1].tp, c.labels[1].fp, c.labels[1].fn_, c.labels[1].tn), (1, 1, 0, 1));
        let s = precision_recall_f1(&c);
        assert!((s.per_label[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.per_label[1].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.weighted_f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&["a", "b", "b"], &["a", "a", "b"]), Some(2.0 / 3.0));
    }

    #[test]
    fn degenerate_counts() {
        let c = confusion_counts(&["a", "a"], &["a", "a"], &labels(&["a"]), Task::IssueCategory).unwrap();
        assert_eq!((c.labels[0].fp, c.labels[0].fn_, c.labels[0].tn), (0, 0, 0));
        let c = confusion_counts(&["a"], &["a"], &labels(&["a", "z"]), Task::IssueCategory).unwrap();
        let s = precision_recall_f1(&c);
        assert_eq!(s.per_label[1].f1, 0.0);
        assert_eq!(s.per_label[1].support, 0);
        assert_eq!(s.weighted_f1, Some(1.0));
        assert_eq!(
            confusion_counts(&["q"], &["a"], &labels(&["a"]), Task::IssueCategory),
            Err(MetricsError::LabelOutsideSet("q".into()))
        );
        assert_eq!(accuracy(&["a"], &["b"]), Some(0.0));
        assert_eq!(accuracy(&[], &[]), None);
    }

    #[test]
    fn consensus_tie_breaks() {
        use Confidence::*;
        assert_eq!(consensus_label(&[("a", Low), ("a", Low), ("b", High)]).as_deref(), Some("a"));
        assert_eq!(consensus_label(&[("b", High), ("a", Low)]).as_deref(), Some("b"));
        assert_eq!(consensus_label(&[("a", High), ("b", Low)]).as_deref(), Some("a"));
        assert_eq!(consensus_label(&[("b", Medium), ("a", Medium)]).as_deref(), Some("a"));
        assert_eq!(consensus_label(&[("a", High)]), None);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohens_kappa(&["x", "y", "x"], &["x", "y", "x"]), Ok(1.0));
        let a = ["x"; 10];
        let b = ["x", "x", "x", "x", "x", "y", "y", "y", "y", "y"];
        assert_eq!(cohens_kappa(&a, &b), Ok(0.0));
        assert_eq!(cohens_kappa(&["x", "x"], &["x", "x"]), Ok(1.0));
        assert_eq!(cohens_kappa(&[], &[]), Err(MetricsError::EmptyCommonSet));
    }

    fn out(mt: &str, ic: &str, c: Confidence) -> Outcome {
        Outcome::Output(ClassificationOutput {
            maintenance_type: mt.into(),
            issue_category: ic.into(),
            specific_issue: None,
            confidence: c,
        })
    }

    fn fail(log: &str) -> Outcome {
        Outcome::Failure(FailureRecord {
            log_id: log.into(),
            model_id: "m".into(),
            kind: FailureKind::Transport,
            detail: "timeout".into(),
            raw_text: None,
        })
    }

    fn results(id: &str, outcomes: Vec<Outcome>) -> ModelResults {
        ModelResults {
            model_id: id.into(),
            entries: outcomes
                .into_iter()
                .enumerate()
                .map(|(i, o)| ResultEntry {
                    log_id: alloc::format!("log-{i}"),
                    outcome: o,
                    usage: TokenUsage { tokens_in: 10, tokens_out: 2, latency: 0.1, estimated: false },
                    attempts: 1,
                    latency: 0.1,
                })
                .collect(),
            wall_clock: 1.0,
        }
    }

    fn review(model: &str, log: &str, verdict: Verdict, corrected: Option<(&str, &str)>) -> ReviewRecord {
        ReviewRecord {
            run_id: "r".into(),
            model_id: model.into(),
            log_id: log.into(),
            verdict,
            corrected_labels: corrected
                .map(|(a, b)| LabelPair { maintenance_type: a.into(), issue_category: b.into() }),
            reviewer: "t".into(),
            reviewed_at: "2025-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn agreement_counts_failures_as_misses() {
        use Confidence::*;
        let a = results("a", vec![out("x", "p", High), out("x", "p", High), fail("log-2")]);
        let b = results("b", vec![out("x", "p", High), out("y", "q", Low), out("y", "q", Low)]);
        let c = results("c", vec![out("x", "p", Low), out("y", "q", Low), out("y", "q", Low)]);
        let models = vec![a.clone(), b, c];
        let con = consensus_labels(&models, Task::MaintenanceType);
        assert_eq!(con.labels.len(), 3);
        assert_eq!(con.labels["log-1"], "y");
        // a: log-0 match, log-1 mismatch, log-2 failed
        assert_eq!(agreement_score(&a, &con.labels, Task::MaintenanceType), Some(1.0 / 3.0));
    }

    #[test]
    fn truth_selection() {
        use Confidence::*;
        let a = results("a", vec![out("x", "p", High), fail("log-1")]);
        let b = results("b", vec![out("y", "q", High), out("y", "q", High)]);
        let models = vec![a, b];
        let bench = select_ground_truth(&models, &GroundTruthSource::BenchmarkModel("a".into()), &[]).unwrap();
        assert_eq!(bench.maintenance_type.len(), 1);
        assert_eq!(
            select_ground_truth(&models, &GroundTruthSource::BenchmarkModel("zz".into()), &[]),
            Err(MetricsError::UnknownModel("zz".into()))
        );
        assert_eq!(select_ground_truth(&models, &GroundTruthSource::HumanVerified, &[]), Err(MetricsError::NoReviews));
        let reviews = vec![
            review("b", "log-0", Verdict::Accepted, None),
            review("a", "log-0", Verdict::Corrected, Some(("z", "r"))),
            review("b", "log-1", Verdict::Hallucination, None),
        ];
        let human = select_ground_truth(&models, &GroundTruthSource::HumanVerified, &reviews).unwrap();
        assert_eq!(human.maintenance_type.len(), 1);
        assert_eq!(human.maintenance_type["log-0"], "z");
    }

    #[test]
    fn error_rate_counts_each_log_once() {
        use Confidence::*;
        let mut outcomes: Vec<Outcome> = (0..98).map(|_| out("x", "p", High)).collect();
        outcomes.push(fail("log-98"));
        outcomes.push(out("x", "p", Low));
        let m = results("m", outcomes);
        assert_eq!(error_rate(&m, &[]).rate, Some(0.01));
        let reviews = vec![
            review("m", "log-99", Verdict::Hallucination, None),
            review("m", "log-98", Verdict::Hallucination, None),
        ];
        let e = error_rate(&m, &reviews);
        assert_eq!((e.n_fail, e.n_hall), (1, 1));
        assert_eq!(e.rate, Some(0.02));
        // superseded by a later accept
        let reviews =
            vec![review("m", "log-99", Verdict::Hallucination, None), review("m", "log-99", Verdict::Accepted, None)];
        assert_eq!(error_rate(&m, &reviews).n_hall, 0);
    }

    fn priced(pin: &str, pout: &str) -> ModelConfig {
        ModelConfig {
            model_id: "m".into(),
            provider_kind: ProviderKind::Mock,
            endpoint: String::new(),
            auth: None,
            remote_model: None,
            price_in: pin.parse().unwrap(),
            price_out: pout.parse().unwrap(),
            max_parallel: 1,
            max_retries: 0,
            requests_per_minute: 60,
            expects_translated_input: false,
            backoff_base_ms: 1000,
        }
    }

    #[test]
    fn cost_examples() {
        let u = [TokenUsage { tokens_in: 1000, tokens_out: 500, latency: 0.0, estimated: false }];
        assert_eq!(compute_cost(&u, &priced("2.00", "8.00")), "0.006".parse::<Decimal>().unwrap());
        assert_eq!(compute_cost(&u, &priced("0", "0")), Decimal::ZERO);
        assert_eq!(compute_cost(&[], &priced("2", "8")), Decimal::ZERO);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(388, 3880.0), Some(0.1));
        assert_eq!(throughput(10, 50.0), Some(0.2));
        assert_eq!(throughput(1, 4.0), Some(0.25));
        assert_eq!(throughput(1, 0.0), None);
    }

    #[test]
    fn calibration_partition() {
        use Confidence::*;
        let m = results("m", vec![out("x", "p", High), out("y", "p", Low), out("x", "p", High), fail("log-3")]);
        let truth = GroundTruth {
            source: GroundTruthSource::Consensus,
            maintenance_type: (0..4).map(|i| (alloc::format!("log-{i}"), "x".to_string())).collect(),
            issue_category: BTreeMap::new(),
        };
        let rows = calibration_table(&m, &truth, Task::MaintenanceType, &labels(&["x", "y"]));
        assert_eq!(rows.iter().map(|r| r.n).sum::<usize>(), 3);
        assert_eq!(rows[0].weighted_f1, Some(0.0));
        assert_eq!(rows[1], CalibrationRow { confidence: Medium, n: 0, weighted_f1: None });
        assert_eq!(rows[2].weighted_f1, Some(1.0));
    }

    #[test]
    fn kappa_matrix_symmetry() {
        use Confidence::*;
        let a = results("a", vec![out("x", "p", High), out("y", "p", High), out("x", "q", High)]);
        let b = results("b", vec![out("x", "p", High), out("x", "p", High), out("x", "q", High)]);
        let k = kappa_matrix(&[a.clone(), b, a], Task::MaintenanceType);
        assert_eq!(k.get(0, 2), Some(1.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
        let avg = KappaMatrix::average(&[k.clone(), k.clone()]).unwrap();
        assert_eq!(avg, k);
    }
}
