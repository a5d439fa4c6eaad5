//! Component-filtered label subsets.
//!
//! Each component code maps to an include or exclude rule per taxonomy. A
//! resolved subset always keeps schema order so rendered prompts are stable.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{ComponentLabelMap, ComponentRules, LabelRule, LabelSchema, Task};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelError {
    #[error("{task} taxonomy is empty")]
    EmptyTaxonomy { task: Task },
    #[error("duplicate label {label:?} in {task} taxonomy")]
    DuplicateLabel { task: Task, label: String },
    #[error("rule for component {component:?} references unknown {task} label {label:?}")]
    UnknownLabel { component: String, task: Task, label: String },
    #[error("rules for component {component:?} resolve to an empty {task} subset")]
    EmptySubset { component: String, task: Task },
    #[error("component {component:?} has no label rule and no default rule is configured")]
    UnmappedComponent { component: String },
}

/// The labels offered to a model for one component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedLabelSet {
    pub component_code: String,
    pub maintenance_types: Vec<String>,
    pub issue_categories: Vec<String>,
}

impl ResolvedLabelSet {
    pub fn labels(&self, task: Task) -> &[String] {
        match task {
            Task::MaintenanceType => &self.maintenance_types,
            Task::IssueCategory => &self.issue_categories,
        }
    }

    pub fn contains(&self, task: Task, label: &str) -> bool {
        self.labels(task).iter().any(|l| l == label)
    }

    /// The whole schema, used when no filtering is wanted.
    pub fn full(component_code: &str, schema: &LabelSchema) -> Self {
        ResolvedLabelSet {
            component_code: component_code.to_string(),
            maintenance_types: schema.maintenance_types.clone(),
            issue_categories: schema.issue_categories.clone(),
        }
    }

    /// True when either list is a strict subset of its taxonomy.
    pub fn is_proper_subset_of(&self, schema: &LabelSchema) -> bool {
        self.maintenance_types.len() < schema.maintenance_types.len()
            || self.issue_categories.len() < schema.issue_categories.len()
    }
}

/// Applies one rule to a taxonomy, preserving taxonomy order.
pub fn apply_rule(rule: &LabelRule, taxonomy: &[String]) -> Vec<String> {
    match rule {
        LabelRule::Include(list) => taxonomy.iter().filter(|l| list.contains(l)).cloned().collect(),
        LabelRule::Exclude(list) => taxonomy.iter().filter(|l| !list.contains(l)).cloned().collect(),
    }
}

fn rules_for<'a>(code: &str, map: &'a ComponentLabelMap) -> Result<&'a ComponentRules, LabelError> {
    map.components
        .get(code)
        .or(map.default_rule.as_ref())
        .ok_or_else(|| LabelError::UnmappedComponent { component: code.to_string() })
}

pub fn resolve_labels(
    component_code: &str,
    map: &ComponentLabelMap,
    schema: &LabelSchema,
) -> Result<ResolvedLabelSet, LabelError> {
    let rules = rules_for(component_code, map)?;
    let mut resolved = ResolvedLabelSet {
        component_code: component_code.to_string(),
        maintenance_types: Vec::new(),
        issue_categories: Vec::new(),
    };
    for task in Task::ALL {
        let labels = apply_rule(rules.rule(task), schema.taxonomy(task));
        if labels.is_empty() {
            return Err(LabelError::EmptySubset { component: component_code.to_string(), task });
        }
        match task {
            Task::MaintenanceType => resolved.maintenance_types = labels,
            Task::IssueCategory => resolved.issue_categories = labels,
        }
    }
    Ok(resolved)
}

/// Checks taxonomy well-formedness.
pub fn validate_schema(schema: &LabelSchema) -> Result<(), LabelError> {
    for task in Task::ALL {
        let taxonomy = schema.taxonomy(task);
        if taxonomy.is_empty() {
            return Err(LabelError::EmptyTaxonomy { task });
        }
        let mut seen = BTreeSet::new();
        for label in taxonomy {
            if !seen.insert(label.as_str()) {
                return Err(LabelError::DuplicateLabel { task, label: label.clone() });
            }
        }
    }
    Ok(())
}

/// Checks that every rule names existing labels and that no mapped component
/// (or the default rule) resolves to an empty subset.
pub fn validate_map(map: &ComponentLabelMap, schema: &LabelSchema) -> Result<(), LabelError> {
    let named = map
        .components
        .iter()
        .map(|(code, rules)| (code.as_str(), rules))
        .chain(map.default_rule.iter().map(|r| ("<default>", r)));
    for (code, rules) in named {
        for task in Task::ALL {
            let taxonomy = schema.taxonomy(task);
            for label in rules.rule(task).labels() {
                if !taxonomy.contains(label) {
                    return Err(LabelError::UnknownLabel { component: code.to_string(), task, label: label.clone() });
                }
            }
            if apply_rule(rules.rule(task), taxonomy).is_empty() {
                return Err(LabelError::EmptySubset { component: code.to_string(), task });
            }
        }
    }
    Ok(())
}
