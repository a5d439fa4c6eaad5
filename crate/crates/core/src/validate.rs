//! Strict schema validation of raw model text.

use alloc::string::{String, ToString};

use serde_json::Value;

use crate::labels::ResolvedLabelSet;
use crate::model::{ClassificationOutput, FailureKind, FailureRecord, Task};

pub const MAX_SPECIFIC_ISSUE_CHARS: usize = 240;

const REQUIRED: [&str; 3] = ["maintenance_type", "issue_category", "confidence"];
const OPTIONAL: [&str; 1] = ["specific_issue"];

/// Strips one surrounding Markdown code fence, if present.
fn unfence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(body) = t.strip_prefix("```") else { return t };
    let Some(body) = body.strip_suffix("```") else { return t };
    // drop an info string such as `json`
    match body.find('\n') {
        Some(nl) if body[..nl].trim().chars().all(|c| c.is_ascii_alphanumeric()) => body[nl + 1..].trim(),
        _ => body.trim(),
    }
}

fn shape_error(detail: String) -> (FailureKind, String) {
    (FailureKind::Schema, detail)
}

fn parse(raw: &str) -> Result<ClassificationOutput, (FailureKind, String)> {
    let value: Value =
        serde_json::from_str(unfence(raw)).map_err(|e| shape_error(alloc::format!("not a JSON object: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(shape_error("top-level value is not an object".into()));
    };
    for key in obj.keys() {
        if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
            return Err(shape_error(alloc::format!("unexpected key {key:?}")));
        }
    }
    let text = |key: &str| -> Result<String, (FailureKind, String)> {
        match obj.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(shape_error(alloc::format!("{key} is not a string"))),
            None => Err(shape_error(alloc::format!("missing key {key:?}"))),
        }
    };
    let maintenance_type = text("maintenance_type")?;
    let issue_category = text("issue_category")?;
    let confidence = text("confidence")?.parse().map_err(shape_error)?;
    let specific_issue = match obj.get("specific_issue") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.trim().is_empty() => None,
        Some(Value::String(s)) => {
            if s.chars().count() > MAX_SPECIFIC_ISSUE_CHARS {
                return Err(shape_error(alloc::format!(
                    "specific_issue exceeds {MAX_SPECIFIC_ISSUE_CHARS} characters"
                )));
            }
            Some(s.clone())
        }
        Some(_) => return Err(shape_error("specific_issue is not a string".into())),
    };
    Ok(ClassificationOutput { maintenance_type, issue_category, specific_issue, confidence })
}

/// Parses and checks one response. Shape problems become `schema` failures;
/// a well-formed object naming a label outside the resolved subset becomes a
/// `label_out_of_set` failure. The raw text is kept on every failure.
pub fn validate_output(
    raw_text: &str,
    labels: &ResolvedLabelSet,
    log_id: &str,
    model_id: &str,
) -> Result<ClassificationOutput, FailureRecord> {
    let fail = |kind, detail| FailureRecord {
        log_id: log_id.to_string(),
        model_id: model_id.to_string(),
        kind,
        detail,
        raw_text: Some(raw_text.to_string()),
    };
    let out = parse(raw_text).map_err(|(kind, detail)| fail(kind, detail))?;
    for task in Task::ALL {
        let label = out.label(task);
        if !labels.contains(task, label) {
            return Err(fail(
                FailureKind::LabelOutOfSet,
                alloc::format!("{task} {label:?} is not in the subset for {}", labels.component_code),
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Confidence;
    use alloc::vec;

    fn labels() -> ResolvedLabelSet {
        ResolvedLabelSet {
            component_code: "MDA10".into(),
            maintenance_types: vec!["Inspection".into(), "Repair".into()],
            issue_categories: vec!["Blade Damage".into(), "Crack".into()],
        }
    }

    fn check(raw: &str) -> Result<ClassificationOutput, FailureRecord> {
        validate_output(raw, &labels(), "log-1", "m")
    }

    #[test]
    fn happy_path() {
        let out =
            check(r#"{"maintenance_type":"Inspection","issue_category":"Blade Damage","confidence":"high"}"#).unwrap();
        assert_eq!(out.confidence, Confidence::High);
        assert_eq!(out.specific_issue, None);
    }

    #[test]
    fn fenced_object_is_accepted() {
        let raw = "```json\n{\"maintenance_type\":\"Repair\",\"issue_category\":\"Crack\",\"specific_issue\":\"leading edge crack\",\"confidence\":\"low\"}\n```";
        let out = check(raw).unwrap();
        assert_eq!(out.specific_issue.as_deref(), Some("leading edge crack"));
    }

    #[test]
    fn prose_is_a_schema_failure() {
        let f = check("Sure! Here is the answer: Inspection").unwrap_err();
        assert_eq!(f.kind, FailureKind::Schema);
        assert_eq!(f.raw_text.as_deref(), Some("Sure! Here is the answer: Inspection"));
    }

    #[test]
    fn out_of_set_label() {
        let f =
            check(r#"{"maintenance_type":"Inspection","issue_category":"Gremlins","confidence":"high"}"#).unwrap_err();
        assert_eq!(f.kind, FailureKind::LabelOutOfSet);
        assert!(f.detail.contains("Gremlins"));
    }

    #[test]
    fn shape_violations() {
        for raw in [
            r#"{"maintenance_type":"Inspection","issue_category":"Crack"}"#,
            r#"{"maintenance_type":"Inspection","issue_category":"Crack","confidence":"certain"}"#,
            r#"{"maintenance_type":"Inspection","issue_category":"Crack","confidence":"High"}"#,
            r#"{"maintenance_type":"Inspection","issue_category":"Crack","confidence":"low","extra":1}"#,
            r#"{"maintenance_type":3,"issue_category":"Crack","confidence":"low"}"#,
            r#"[{"maintenance_type":"Inspection"}]"#,
            r#"{"maintenance_type":"Inspection","issue_category":"Crack","confidence":"low"} trailing"#,
        ] {
            assert_eq!(check(raw).unwrap_err().kind, FailureKind::Schema, "{raw}");
        }
        let long = alloc::format!(
            r#"{{"maintenance_type":"Inspection","issue_category":"Crack","confidence":"low","specific_issue":"{}"}}"#,
            "x".repeat(241)
        );
        assert_eq!(check(&long).unwrap_err().kind, FailureKind::Schema);
    }

    #[test]
    fn near_miss_labels_are_not_fuzzed() {
        let f = check(r#"{"maintenance_type":"inspection","issue_category":"Crack","confidence":"low"}"#).unwrap_err();
        assert_eq!(f.kind, FailureKind::LabelOutOfSet);
    }
}
