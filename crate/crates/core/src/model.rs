//! Shared domain vocabulary: logs, taxonomies, model outputs, archive records
//! and review verdicts.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

/// Whether a log's text is the original record or a machine translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Original,
    Translated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Translated => "translated",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" | "" => Ok(Provenance::Original),
            "translated" => Ok(Provenance::Translated),
            other => Err(alloc::format!("unknown provenance {other:?}")),
        }
    }
}

/// One work-order record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaintenanceLog {
    pub log_id: String,
    pub component_code: String,
    pub component_name: String,
    pub description: String,
    #[serde(default)]
    pub observations: String,
    pub language: String,
    #[serde(default)]
    pub provenance: Provenance,
}

impl MaintenanceLog {
    /// Description and observations joined by one space; the text compared by
    /// the redundancy filters.
    pub fn combined_text(&self) -> String {
        if self.observations.is_empty() {
            self.description.clone()
        } else {
            let mut s = String::with_capacity(self.description.len() + 1 + self.observations.len());
            s.push_str(&self.description);
            s.push(' ');
            s.push_str(&self.observations);
            s
        }
    }
}

/// The two classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    MaintenanceType,
    IssueCategory,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::MaintenanceType, Task::IssueCategory];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::MaintenanceType => "maintenance_type",
            Task::IssueCategory => "issue_category",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Self-reported certainty of a classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Low,
    Medium,
    High,
}

impl Confidence {
    pub const ALL: [Confidence; 3] = [Confidence::Low, Confidence::Medium, Confidence::High];

    /// Ordinal weight used by consensus tie-breaking (high=3, medium=2, low=1).
    pub fn weight(self) -> u32 {
        match self {
            Confidence::Low => 1,
            Confidence::Medium => 2,
            Confidence::High => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::Low => "low",
            Confidence::Medium => "medium",
            Confidence::High => "high",
        }
    }
}

impl FromStr for Confidence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Confidence::Low),
            "medium" => Ok(Confidence::Medium),
            "high" => Ok(Confidence::High),
            other => Err(alloc::format!("invalid confidence {other:?}")),
        }
    }
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The two taxonomies. Labels are case-sensitive exact-match keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub schema_version: String,
    pub maintenance_types: Vec<String>,
    pub issue_categories: Vec<String>,
}

impl LabelSchema {
    pub fn taxonomy(&self, task: Task) -> &[String] {
        match task {
            Task::MaintenanceType => &self.maintenance_types,
            Task::IssueCategory => &self.issue_categories,
        }
    }
}

/// Include or exclude rule over one taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    Include(Vec<String>),
    Exclude(Vec<String>),
}

impl LabelRule {
    /// The rule that admits the full taxonomy.
    pub fn all() -> Self {
        LabelRule::Exclude(Vec::new())
    }

    pub fn labels(&self) -> &[String] {
        match self {
            LabelRule::Include(l) | LabelRule::Exclude(l) => l,
        }
    }
}

/// Per-component pair of rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentRules {
    pub maintenance: LabelRule,
    pub issue: LabelRule,
}

impl ComponentRules {
    pub fn all() -> Self {
        ComponentRules { maintenance: LabelRule::all(), issue: LabelRule::all() }
    }

    pub fn rule(&self, task: Task) -> &LabelRule {
        match task {
            Task::MaintenanceType => &self.maintenance,
            Task::IssueCategory => &self.issue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ComponentLabelMap {
    #[serde(default)]
    pub components: BTreeMap<String, ComponentRules>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_rule: Option<ComponentRules>,
}

/// A model's structured verdict for one log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationOutput {
    pub maintenance_type: String,
    pub issue_category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specific_issue: Option<String>,
    pub confidence: Confidence,
}

impl ClassificationOutput {
    pub fn label(&self, task: Task) -> &str {
        match task {
            Task::MaintenanceType => &self.maintenance_type,
            Task::IssueCategory => &self.issue_category,
        }
    }
}

/// A (maintenance type, issue category) pair, used for corrections and truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPair {
    pub maintenance_type: String,
    pub issue_category: String,
}

impl LabelPair {
    pub fn label(&self, task: Task) -> &str {
        match task {
            Task::MaintenanceType => &self.maintenance_type,
            Task::IssueCategory => &self.issue_category,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    OpenaiCompatible,
    Gemini,
    LocalServer,
    Mock,
}

impl ProviderKind {
    /// Hosted kinds need an API key.
    pub fn is_hosted(self) -> bool {
        matches!(self, ProviderKind::OpenaiCompatible | ProviderKind::Gemini)
    }
}

fn default_backoff_ms() -> u64 {
    1000
}

fn default_parallel() -> u32 {
    4
}

fn default_retries() -> u32 {
    3
}

fn default_rpm() -> u32 {
    60
}

fn is_default_backoff(v: &u64) -> bool {
    *v == default_backoff_ms()
}

/// One configured model. Prices are currency per one million tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_id: String,
    pub provider_kind: ProviderKind,
    /// Endpoint URL; for the mock kind, the fixture file path or `echo:<prefix>`.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth: Option<String>,
    /// Model name sent on the wire when it differs from `model_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_model: Option<String>,
    pub price_in: Decimal,
    pub price_out: Decimal,
    #[serde(default = "default_parallel")]
    pub max_parallel: u32,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default)]
    pub expects_translated_input: bool,
    #[serde(default = "default_backoff_ms", skip_serializing_if = "is_default_backoff")]
    pub backoff_base_ms: u64,
}

impl ModelConfig {
    pub fn wire_model(&self) -> &str {
        self.remote_model.as_deref().unwrap_or(&self.model_id)
    }
}

/// Token counts and latency for one request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TokenUsage {
    pub tokens_in: u64,
    pub tokens_out: u64,
    /// Seconds.
    pub latency: f64,
    /// Set when the endpoint reported no usage and counts were estimated.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub estimated: bool,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.tokens_in + self.tokens_out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Transport,
    Schema,
    LabelOutOfSet,
    OverLimit,
}

impl FailureKind {
    pub const ALL: [FailureKind; 4] =
        [FailureKind::Transport, FailureKind::Schema, FailureKind::LabelOutOfSet, FailureKind::OverLimit];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::Transport => "transport",
            FailureKind::Schema => "schema",
            FailureKind::LabelOutOfSet => "label_out_of_set",
            FailureKind::OverLimit => "over_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub log_id: String,
    pub model_id: String,
    pub kind: FailureKind,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

/// Either a validated output or the failure that replaced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Output(ClassificationOutput),
    Failure(FailureRecord),
}

impl Outcome {
    pub fn output(&self) -> Option<&ClassificationOutput> {
        match self {
            Outcome::Output(o) => Some(o),
            Outcome::Failure(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&FailureRecord> {
        match self {
            Outcome::Output(_) => None,
            Outcome::Failure(f) => Some(f),
        }
    }
}

/// One line of a model's results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub log_id: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub usage: TokenUsage,
    pub attempts: u32,
    pub latency: f64,
}

/// Everything one model produced during a run, in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResults {
    pub model_id: String,
    pub entries: Vec<ResultEntry>,
    /// Seconds from the first request start to the last response.
    pub wall_clock: f64,
}

impl ModelResults {
    pub fn failures(&self) -> impl Iterator<Item = &FailureRecord> {
        self.entries.iter().filter_map(|e| e.outcome.failure())
    }

    pub fn outputs(&self) -> impl Iterator<Item = (&str, &ClassificationOutput)> {
        self.entries.iter().filter_map(|e| e.outcome.output().map(|o| (e.log_id.as_str(), o)))
    }

    pub fn output_for(&self, log_id: &str) -> Option<&ClassificationOutput> {
        self.entries.iter().find(|e| e.log_id == log_id).and_then(|e| e.outcome.output())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Corrected,
    Hallucination,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accepted => "accepted",
            Verdict::Corrected => "corrected",
            Verdict::Hallucination => "hallucination",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub run_id: String,
    pub model_id: String,
    pub log_id: String,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_labels: Option<LabelPair>,
    pub reviewer: String,
    pub reviewed_at: String,
}

/// Reference against which predictions are scored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruthSource {
    BenchmarkModel(String),
    Consensus,
    HumanVerified,
}

impl fmt::Display for GroundTruthSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTruthSource::BenchmarkModel(id) => write!(f, "benchmark:{id}"),
            GroundTruthSource::Consensus => f.write_str("consensus"),
            GroundTruthSource::HumanVerified => f.write_str("human"),
        }
    }
}

impl FromStr for GroundTruthSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "consensus" => Ok(GroundTruthSource::Consensus),
            "human" | "human_verified" => Ok(GroundTruthSource::HumanVerified),
            _ => match s.strip_prefix("benchmark:") {
                Some(id) if !id.is_empty() => Ok(GroundTruthSource::BenchmarkModel(id.to_string())),
                _ => {
                    Err(alloc::format!("invalid truth source {s:?}; expected benchmark:<model_id>, consensus or human"))
                }
            },
        }
    }
}
