#![allow(dead_code)]

use maintbench_core::{
    ClassificationOutput, Confidence, FailureKind, FailureRecord, LabelSchema, MaintenanceLog, ModelResults, Outcome,
    Provenance, ResultEntry, TokenUsage,
};

pub fn log(id: usize, code: &str, desc: &str, obs: &str) -> MaintenanceLog {
    MaintenanceLog {
        log_id: format!("log-{id:06}"),
        component_code: code.to_string(),
        component_name: format!("{code} name"),
        description: desc.to_string(),
        observations: obs.to_string(),
        language: "en".into(),
        provenance: Provenance::Original,
    }
}

pub fn schema(mt: usize, ic: usize) -> LabelSchema {
    LabelSchema {
        schema_version: "t".into(),
        maintenance_types: (0..mt).map(|i| format!("Type {i}")).collect(),
        issue_categories: (0..ic).map(|i| format!("Issue {i}")).collect(),
    }
}

pub fn output(mt: &str, ic: &str, confidence: Confidence) -> Outcome {
    Outcome::Output(ClassificationOutput {
        maintenance_type: mt.into(),
        issue_category: ic.into(),
        specific_issue: None,
        confidence,
    })
}

pub fn failure(log_id: &str, model_id: &str, kind: FailureKind) -> Outcome {
    Outcome::Failure(FailureRecord {
        log_id: log_id.into(),
        model_id: model_id.into(),
        kind,
        detail: "planted".into(),
        raw_text: None,
    })
}

pub fn entry(log_id: &str, outcome: Outcome) -> ResultEntry {
    ResultEntry {
        log_id: log_id.into(),
        outcome,
        usage: TokenUsage { tokens_in: 10, tokens_out: 2, latency: 0.5, estimated: false },
        attempts: 1,
        latency: 0.5,
    }
}

pub fn results(model_id: &str, entries: Vec<ResultEntry>) -> ModelResults {
    ModelResults { model_id: model_id.into(), entries, wall_clock: 1.0 }
}

pub const CONFIDENCES: [Confidence; 3] = Confidence::ALL;
