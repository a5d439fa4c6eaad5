//! Classification prompt rendering.
//!
//! A template is plain text with seven named placeholders, each present
//! exactly once. Rendering is pure substitution, so identical inputs always
//! give identical prompts.

use alloc::string::String;
use alloc::vec::Vec;

use crate::labels::ResolvedLabelSet;
use crate::model::MaintenanceLog;

pub const PLACEHOLDERS: [&str; 7] = [
    "component_code",
    "component_name",
    "description",
    "observations",
    "maintenance_types",
    "issue_categories",
    "output_schema",
];

/// Output-structure instructions substituted for `{output_schema}`.
pub const OUTPUT_SCHEMA_BLOCK: &str = "\
Respond with a single JSON object and nothing else: no prose, no code fences.
The object must have exactly these keys:
  \"maintenance_type\": one label copied verbatim from the Maintenance Type list
  \"issue_category\": one label copied verbatim from the Issue Category list
  \"specific_issue\": optional short phrase (at most 240 characters) naming the concrete problem, or null
  \"confidence\": one of \"low\", \"medium\", \"high\"";

/// Rendering of an empty observations field.
pub const EMPTY_FIELD: &str = "(none)";

/// The default template shipped with the harness.
pub const DEFAULT_TEMPLATE: &str = "\
You classify wind turbine maintenance work orders.

Component: {component_code} ({component_name})
Log description: {description}
Additional observations: {observations}

Choose exactly one Maintenance Type from this list:
{maintenance_types}
Choose exactly one Issue Category from this list:
{issue_categories}
Be brief. Use only the labels listed above.
{output_schema}
";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("placeholder {{{0}}} is missing from the template")]
    Missing(&'static str),
    #[error("placeholder {{{0}}} appears more than once in the template")]
    Repeated(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, TemplateError> {
        let text = text.into();
        for name in PLACEHOLDERS {
            let token = alloc::format!("{{{name}}}");
            match text.matches(token.as_str()).count() {
                0 => return Err(TemplateError::Missing(name)),
                1 => {}
                _ => return Err(TemplateError::Repeated(name)),
            }
        }
        Ok(PromptTemplate { text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(DEFAULT_TEMPLATE).expect("default template is well-formed")
    }
}

/// One `- label` line per label.
pub fn label_list(labels: &[String]) -> String {
    let mut out = String::new();
    for l in labels {
        out.push_str("- ");
        out.push_str(l);
        out.push('\n');
    }
    out
}

fn or_none(s: &str) -> &str {
    if s.is_empty() {
        EMPTY_FIELD
    } else {
        s
    }
}

/// Substitutes all placeholders in a single left-to-right pass, so text
/// inserted for one placeholder is never re-scanned.
pub fn render_prompt(log: &MaintenanceLog, labels: &ResolvedLabelSet, template: &PromptTemplate) -> String {
    let maintenance = label_list(&labels.maintenance_types);
    let issues = label_list(&labels.issue_categories);
    let values: [(&str, &str); 7] = [
        ("component_code", &log.component_code),
        ("component_name", or_none(&log.component_name)),
        ("description", &log.description),
        ("observations", or_none(&log.observations)),
        ("maintenance_types", &maintenance),
        ("issue_categories", &issues),
        ("output_schema", OUTPUT_SCHEMA_BLOCK),
    ];

    let src = template.text();
    let mut out = String::with_capacity(src.len() + maintenance.len() + issues.len() + 512);
    let mut rest = src;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        for (name, value) in values {
            if let Some(tail) = after.strip_prefix(name).and_then(|t| t.strip_prefix('}')) {
                out.push_str(value);
                rest = tail;
                continue 'scan;
            }
        }
        out.push('{');
        rest = after;
    }
    out.push_str(rest);
    out
}

/// Pre-flight token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Counts lines of the prompt equal to `- label`.
pub fn label_line_count(prompt: &str, label: &str) -> usize {
    prompt.lines().filter(|l| l.strip_prefix("- ") == Some(label)).count()
}

/// Lines of a rendered label list, for checks.
pub fn listed_labels(prompt: &str) -> Vec<&str> {
    prompt.lines().filter_map(|l| l.strip_prefix("- ")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Provenance;
    use alloc::string::ToString;

    fn rotor_log() -> MaintenanceLog {
        MaintenanceLog {
            log_id: "log-000001".into(),
            component_code: "MDA10".into(),
            component_name: "Rotor Blades".into(),
            description: "Inspecting the damage on WTG05".into(),
            observations: "We found that we actually have two damages: new blade damage discovered".into(),
            language: "en".into(),
            provenance: Provenance::Original,
        }
    }

    fn two_labels() -> ResolvedLabelSet {
        ResolvedLabelSet {
            component_code: "MDA10".into(),
            maintenance_types: alloc::vec!["Inspection".to_string(), "Repair".to_string()],
            issue_categories: alloc::vec!["Blade Damage".to_string()],
        }
    }

    #[test]
    fn renders_log_and_labels() {
        let p = render_prompt(&rotor_log(), &two_labels(), &PromptTemplate::default());
        assert!(p.contains("Inspecting the damage on WTG05"));
        assert!(p.contains("new blade damage discovered"));
        assert_eq!(label_line_count(&p, "Inspection"), 1);
        assert_eq!(label_line_count(&p, "Repair"), 1);
        assert_eq!(label_line_count(&p, "Blade Damage"), 1);
        assert!(p.contains(OUTPUT_SCHEMA_BLOCK));
        assert!(!p.contains("{description}"));
    }

    #[test]
    fn empty_observations_render_as_none() {
        let mut log = rotor_log();
        log.observations.clear();
        let p = render_prompt(&log, &two_labels(), &PromptTemplate::default());
        assert!(p.contains("Additional observations: (none)"));
    }

    #[test]
    fn rendering_is_deterministic_and_not_rescanned() {
        let mut log = rotor_log();
        log.description = "literal {observations} braces".into();
        let t = PromptTemplate::default();
        let a = render_prompt(&log, &two_labels(), &t);
        assert_eq!(a, render_prompt(&log, &two_labels(), &t));
        assert!(a.contains("literal {observations} braces"));
    }

    #[test]
    fn template_validation() {
        assert_eq!(PromptTemplate::new("no placeholders"), Err(TemplateError::Missing("component_code")));
        let twice = alloc::format!("{DEFAULT_TEMPLATE}{{description}}");
        assert_eq!(PromptTemplate::new(twice), Err(TemplateError::Repeated("description")));
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcdefgh"), 2);
        assert_eq!(estimate_tokens("abcdefghi"), 3);
        assert_eq!(estimate_tokens("ãããã"), 1);
    }
}
