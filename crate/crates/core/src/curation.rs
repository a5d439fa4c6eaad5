//! Rule-based curation stages: normalization, near-duplicate pruning,
//! cascading frequency caps and majority-class down-sampling.
//!
//! Every stage is deterministic for a fixed input order and seed, and only
//! ever drops logs.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::MaintenanceLog;
use crate::text::{collapse_whitespace, within_distance};

/// A cascading cap: a duplicate group of at least `threshold` members keeps
/// at most `cap` of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyCap {
    pub threshold: usize,
    pub cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationParams {
    pub levenshtein_threshold: usize,
    pub frequency_caps: Vec<FrequencyCap>,
    pub downsample_target: f64,
    pub seed: u64,
}

impl Default for CurationParams {
    fn default() -> Self {
        CurationParams {
            levenshtein_threshold: 2,
            frequency_caps: alloc::vec![FrequencyCap { threshold: 20, cap: 3 }, FrequencyCap { threshold: 5, cap: 10 },],
            downsample_target: 0.5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurationParamsError {
    #[error("downsample_target must lie in (0, 1], got {0}")]
    Target(f64),
    #[error("frequency caps must strictly decrease as thresholds rise ({0:?})")]
    CapOrder(Vec<FrequencyCap>),
    #[error("frequency cap thresholds and caps must be positive")]
    ZeroCap,
}

impl CurationParams {
    pub fn validate(&self) -> Result<(), CurationParamsError> {
        if !(self.downsample_target > 0.0 && self.downsample_target <= 1.0) {
            return Err(CurationParamsError::Target(self.downsample_target));
        }
        if self.frequency_caps.iter().any(|c| c.threshold == 0 || c.cap == 0) {
            return Err(CurationParamsError::ZeroCap);
        }
        let sorted = self.caps_by_threshold_desc();
        for pair in sorted.windows(2) {
            // pair[0] has the higher threshold
            if pair[0].threshold == pair[1].threshold || pair[0].cap >= pair[1].cap {
                return Err(CurationParamsError::CapOrder(self.frequency_caps.clone()));
            }
        }
        Ok(())
    }

    fn caps_by_threshold_desc(&self) -> Vec<FrequencyCap> {
        let mut caps = self.frequency_caps.clone();
        caps.sort_by_key(|c| core::cmp::Reverse(c.threshold));
        caps
    }

    /// The cap for a duplicate group of `size`, if any rule fires.
    pub fn cap_for(&self, size: usize) -> Option<usize> {
        self.caps_by_threshold_desc().into_iter().find(|c| c.threshold <= size).map(|c| c.cap)
    }

    pub(crate) fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Collapses whitespace in every text field and replaces the component name
/// with the legend's canonical name. Returns whether the code was mapped.
pub fn normalize(log: &MaintenanceLog, legend: &BTreeMap<String, String>) -> (MaintenanceLog, bool) {
    let code = collapse_whitespace(&log.component_code);
    let (name, mapped) = match legend.get(&code) {
        Some(canonical) => (canonical.clone(), true),
        None => (collapse_whitespace(&log.component_name), false),
    };
    let out = MaintenanceLog {
        log_id: log.log_id.clone(),
        component_code: code,
        component_name: name,
        description: collapse_whitespace(&log.description),
        observations: collapse_whitespace(&log.observations),
        language: log.language.clone(),
        provenance: log.provenance,
    };
    (out, mapped)
}

/// Normalizes a list and counts codes missing from the legend.
pub fn normalize_all(logs: &[MaintenanceLog], legend: &BTreeMap<String, String>) -> (Vec<MaintenanceLog>, usize) {
    let mut unmapped = 0;
    let out = logs
        .iter()
        .map(|l| {
            let (n, mapped) = normalize(l, legend);
            unmapped += usize::from(!mapped);
            n
        })
        .collect();
    (out, unmapped)
}

/// Greedy first-kept pruning within each component group. A log is dropped
/// when its combined text is within the threshold of any kept log of the
/// same component.
pub fn prune_near_duplicates(
    logs: &[MaintenanceLog],
    params: &CurationParams,
) -> (Vec<MaintenanceLog>, Vec<MaintenanceLog>) {
    let mut kept_text: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for log in logs {
        let text = log.combined_text();
        let group = kept_text.entry(log.component_code.as_str()).or_default();
        if group.iter().any(|k| within_distance(k, &text, params.levenshtein_threshold)) {
            removed.push(log.clone());
        } else {
            group.push(text);
            kept.push(log.clone());
        }
    }
    (kept, removed)
}

/// Caps exact-duplicate groups. Survivors of a capped group are drawn by
/// seeded uniform sampling without replacement; output keeps input order.
pub fn apply_frequency_caps(logs: &[MaintenanceLog], params: &CurationParams) -> Vec<MaintenanceLog> {
    // groups in order of first appearance
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, log) in logs.iter().enumerate() {
        let text = log.combined_text();
        let g = *index.entry(text).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }

    let mut keep = alloc::vec![true; logs.len()];
    let mut rng = params.rng(0xCA95);
    for members in &groups {
        let Some(cap) = params.cap_for(members.len()) else { continue };
        if cap >= members.len() {
            continue;
        }
        for &m in members {
            keep[m] = false;
        }
        for pick in rand::seq::index::sample(&mut rng, members.len(), cap).into_iter() {
            keep[members[pick]] = true;
        }
    }
    logs.iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l.clone()).collect()
}

/// Largest majority count `k` such that `k / (k + others) <= target`.
pub fn majority_limit(others: usize, target: f64) -> usize {
    if target >= 1.0 {
        return usize::MAX;
    }
    let others_f = others as f64;
    let mut k = libm::floor(target * others_f / (1.0 - target)) as usize;
    // guard the float estimate against rounding on either side
    let share = |k: usize| k as f64 / (k + others) as f64;
    while k > 0 && share(k) > target {
        k -= 1;
    }
    while share(k + 1) <= target {
        k += 1;
    }
    k
}

/// Shrinks the single most frequent component class until its share is at
/// most the target. Ties between equally large classes go to the smallest
/// code. A dataset with only one class is returned unchanged.
pub fn downsample_majority(logs: &[MaintenanceLog], params: &CurationParams) -> Vec<MaintenanceLog> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for log in logs {
        *counts.entry(log.component_code.as_str()).or_default() += 1;
    }
    let Some((&major, &count)) = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) else {
        return logs.to_vec();
    };
    let total = logs.len();
    let others = total - count;
    if others == 0 || (count as f64) <= params.downsample_target * total as f64 {
        return logs.to_vec();
    }
    let limit = majority_limit(others, params.downsample_target).min(count);

    let members: Vec<usize> =
        logs.iter().enumerate().filter(|(_, l)| l.component_code == major).map(|(i, _)| i).collect();
    let mut keep = alloc::vec![true; logs.len()];
    for &m in &members {
        keep[m] = false;
    }
    let mut rng = params.rng(0xD05A);
    for pick in rand::seq::index::sample(&mut rng, members.len(), limit).into_iter() {
        keep[members[pick]] = true;
    }
    logs.iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l.clone()).collect()
}
