//! The full curation pipeline over an ingested dataset.

use maintbench_core::cluster::{cluster_points, distance_matrix, sample_representatives, ClusterSummary};
use maintbench_core::curation::{apply_frequency_caps, downsample_majority, normalize_all, prune_near_duplicates};
use maintbench_core::MaintenanceLog;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::dataset::Ingested;
use crate::embed::embed_corpus;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReport {
    pub enabled: bool,
    pub input: usize,
    #[serde(flatten)]
    pub clusters: Option<ClusterSummary>,
    pub removed: usize,
}

/// Counts per stage, in pipeline order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub seed: u64,
    pub rows_ingested: usize,
    pub dropped_empty_description: usize,
    pub unmapped_components: usize,
    pub near_duplicates_removed: usize,
    pub frequency_cap_removed: usize,
    pub downsample_removed: usize,
    pub semantic_dedup: DedupReport,
    pub output: usize,
}

/// Runs every stage. `seed` overrides both the curation and clustering seeds.
pub async fn curate(
    input: Ingested,
    config: &Config,
    seed: Option<u64>,
) -> Result<(Vec<MaintenanceLog>, CurationReport)> {
    let mut params = config.curation.params.clone();
    let mut dedup = config.dedup.params;
    if let Some(s) = seed {
        params.seed = s;
        dedup.seed = s;
    }
    let rows = input.logs.len() + input.dropped_empty;

    let (logs, unmapped) = normalize_all(&input.logs, &config.components);
    if unmapped > 0 {
        tracing::warn!(unmapped, "logs with component codes missing from the legend");
    }
    let (kept, removed) = prune_near_duplicates(&logs, &params);
    let capped = apply_frequency_caps(&kept, &params);
    let balanced = downsample_majority(&capped, &params);

    let (out, semantic) = if config.dedup.enabled && !balanced.is_empty() {
        let texts: Vec<String> = balanced.iter().map(MaintenanceLog::combined_text).collect();
        let vectors = embed_corpus(&texts, &config.embedding).await?;
        let n = vectors.len();
        let dist = distance_matrix(&vectors)?;
        let assignment = cluster_points(n, |i, j| dist[i * n + j], &dedup)?;
        let retained = sample_representatives(&assignment, &balanced, &dedup);
        let report = DedupReport {
            enabled: true,
            input: n,
            clusters: Some(ClusterSummary::new(&assignment, retained.len())),
            removed: n - retained.len(),
        };
        (retained, report)
    } else {
        let report = DedupReport { enabled: config.dedup.enabled, input: balanced.len(), clusters: None, removed: 0 };
        (balanced.clone(), report)
    };

    let report = CurationReport {
        seed: params.seed,
        rows_ingested: rows,
        dropped_empty_description: input.dropped_empty,
        unmapped_components: unmapped,
        near_duplicates_removed: removed.len(),
        frequency_cap_removed: kept.len() - capped.len(),
        downsample_removed: capped.len() - balanced.len(),
        semantic_dedup: semantic,
        output: out.len(),
    };
    Ok((out, report))
}
