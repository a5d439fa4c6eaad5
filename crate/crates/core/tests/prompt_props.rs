mod common;

use std::collections::BTreeMap;

use common::{log, schema};
use maintbench_core::labels::apply_rule;
use maintbench_core::prompt::{label_line_count, listed_labels};
use maintbench_core::{
    estimate_tokens, render_prompt, resolve_labels, validate_output, ComponentLabelMap, ComponentRules, FailureKind,
    LabelRule, LabelSchema, PromptTemplate, ResolvedLabelSet, Task,
};
use proptest::prelude::*;

fn mask_subset(taxonomy: &[String], mask: &[bool]) -> Vec<String> {
    taxonomy.iter().zip(mask).filter(|(_, m)| **m).map(|(l, _)| l.clone()).collect()
}

fn complement(taxonomy: &[String], chosen: &[String]) -> Vec<String> {
    taxonomy.iter().filter(|l| !chosen.contains(l)).cloned().collect()
}

fn map_with(code: &str, rules: ComponentRules) -> ComponentLabelMap {
    ComponentLabelMap { components: BTreeMap::from([(code.to_string(), rules)]), default_rule: None }
}

fn subset_strategy() -> impl Strategy<Value = (LabelSchema, Vec<bool>, Vec<bool>)> {
    (1usize..12, 1usize..20).prop_flat_map(|(mt, ic)| {
        (Just(schema(mt, ic)), prop::collection::vec(any::<bool>(), mt), prop::collection::vec(any::<bool>(), ic))
    })
}

proptest! {
    #[test]
    fn include_and_exclude_are_dual((s, mm, im) in subset_strategy()) {
        let mt = mask_subset(&s.maintenance_types, &mm);
        let ic = mask_subset(&s.issue_categories, &im);
        prop_assume!(!mt.is_empty() && !ic.is_empty());
        let inc = map_with("C", ComponentRules { maintenance: LabelRule::Include(mt.clone()), issue: LabelRule::Include(ic.clone()) });
        let exc = map_with("C", ComponentRules {
            maintenance: LabelRule::Exclude(complement(&s.maintenance_types, &mt)),
            issue: LabelRule::Exclude(complement(&s.issue_categories, &ic)),
        });
        let a = resolve_labels("C", &inc, &s).unwrap();
        let b = resolve_labels("C", &exc, &s).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.maintenance_types, mt);
    }

    #[test]
    fn filtering_shrinks_prompts((s, mm, im) in subset_strategy(), desc in "[a-z ]{1,60}") {
        let rule_m = LabelRule::Include(mask_subset(&s.maintenance_types, &mm));
        let rule_i = LabelRule::Include(mask_subset(&s.issue_categories, &im));
        let subset = ResolvedLabelSet {
            component_code: "C".into(),
            maintenance_types: apply_rule(&rule_m, &s.maintenance_types),
            issue_categories: apply_rule(&rule_i, &s.issue_categories),
        };
        prop_assume!(!subset.maintenance_types.is_empty() && !subset.issue_categories.is_empty());
        let l = log(1, "C", &desc, "");
        let t = PromptTemplate::default();
        let small = estimate_tokens(&render_prompt(&l, &subset, &t));
        let full = estimate_tokens(&render_prompt(&l, &ResolvedLabelSet::full("C", &s), &t));
        prop_assert!(small <= full);
        if subset.is_proper_subset_of(&s) {
            prop_assert!(small < full);
        }
    }

    #[test]
    fn rendering_preserves_labels(
        mt in prop::collection::btree_set("[A-Za-z][A-Za-z /{}-]{0,20}", 1..8),
        ic in prop::collection::btree_set("[A-Za-z][A-Za-z /{}-]{0,20}", 1..8),
        desc in "[^\n]{0,40}",
    ) {
        let set = ResolvedLabelSet {
            component_code: "C".into(),
            maintenance_types: mt.into_iter().collect(),
            issue_categories: ic.into_iter().filter(|l| !l.is_empty()).collect(),
        };
        let prompt = render_prompt(&log(1, "C", &desc, ""), &set, &PromptTemplate::default());
        let listed = listed_labels(&prompt);
        let expected: Vec<&str> = set.maintenance_types.iter().chain(&set.issue_categories).map(String::as_str).collect();
        prop_assert_eq!(listed, expected);
        for label in set.maintenance_types.iter().chain(&set.issue_categories) {
            prop_assert!(label_line_count(&prompt, label) >= 1);
        }
    }

    #[test]
    fn accepted_outputs_stay_in_subset((s, mm, im) in subset_strategy(), pick_m in any::<prop::sample::Index>(), pick_i in any::<prop::sample::Index>()) {
        let set = ResolvedLabelSet {
            component_code: "C".into(),
            maintenance_types: mask_subset(&s.maintenance_types, &mm),
            issue_categories: mask_subset(&s.issue_categories, &im),
        };
        let m = pick_m.get(&s.maintenance_types);
        let i = pick_i.get(&s.issue_categories);
        let raw = serde_json::json!({"maintenance_type": m, "issue_category": i, "confidence": "medium"}).to_string();
        match validate_output(&raw, &set, "log-000001", "m") {
            Ok(out) => {
                prop_assert!(set.contains(Task::MaintenanceType, &out.maintenance_type));
                prop_assert!(set.contains(Task::IssueCategory, &out.issue_category));
            }
            Err(f) => {
                prop_assert_eq!(f.kind, FailureKind::LabelOutOfSet);
                prop_assert!(!set.contains(Task::MaintenanceType, m) || !set.contains(Task::IssueCategory, i));
            }
        }
    }
}
