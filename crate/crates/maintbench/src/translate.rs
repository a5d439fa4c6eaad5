//! Machine translation of non-English logs ahead of a benchmark run.

use maintbench_core::{MaintenanceLog, Provenance};
use serde::{Deserialize, Serialize};

use crate::provider::{Client, Request};

pub const TARGET_LANGUAGE: &str = "en";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationFailure {
    pub log_id: String,
    pub field: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub model_id: String,
    pub translated: usize,
    pub already_english: usize,
    /// Logs left in the original language after a provider failure.
    pub failed: Vec<TranslationFailure>,
}

pub fn render_translation_prompt(template: &str, language: &str, text: &str) -> String {
    // `{text}` last, so log text containing `{language}` is left alone
    template.replace("{language}", language).replace("{text}", text)
}

async fn translate_field(
    client: &Client,
    template: &str,
    log: &MaintenanceLog,
    field: &str,
    text: &str,
) -> Result<String, TranslationFailure> {
    if text.is_empty() {
        return Ok(String::new());
    }
    let request = Request {
        key: format!("{}/{field}", log.log_id),
        prompt: render_translation_prompt(template, &log.language, text),
        echo_text: text.to_string(),
    };
    match client.classify(&request).await {
        Ok(reply) => Ok(reply.raw_text.trim().to_string()),
        Err(f) => Err(TranslationFailure { log_id: log.log_id.clone(), field: field.into(), detail: f.detail }),
    }
}

/// Translates every non-English log. A log whose translation fails keeps its
/// original text and language and is listed in the report. Returns the
/// output logs in input order.
pub async fn translate_corpus(
    logs: &[MaintenanceLog],
    client: &Client,
    template: &str,
) -> (Vec<MaintenanceLog>, TranslationReport) {
    let mut report = TranslationReport {
        model_id: client.config().model_id.clone(),
        translated: 0,
        already_english: 0,
        failed: Vec::new(),
    };
    let mut out = Vec::with_capacity(logs.len());
    for log in logs {
        if log.language.eq_ignore_ascii_case(TARGET_LANGUAGE) {
            report.already_english += 1;
            out.push(log.clone());
            continue;
        }
        let description = translate_field(client, template, log, "description", &log.description).await;
        let observations = translate_field(client, template, log, "observations", &log.observations).await;
        match (description, observations) {
            (Ok(d), Ok(o)) => {
                report.translated += 1;
                out.push(MaintenanceLog {
                    description: d,
                    observations: o,
                    language: TARGET_LANGUAGE.into(),
                    provenance: Provenance::Translated,
                    ..log.clone()
                });
            }
            (d, o) => {
                report.failed.extend(d.err());
                report.failed.extend(o.err());
                out.push(log.clone());
            }
        }
    }
    (out, report)
}
