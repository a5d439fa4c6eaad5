//! Benchmark execution: every selected model over every log, streamed into
//! a run archive.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::Utc;
use maintbench_core::{
    render_prompt, resolve_labels, validate_output, FailureRecord, MaintenanceLog, ModelConfig, Outcome,
    PromptTemplate, ProviderKind, ResolvedLabelSet, ResultEntry,
};
use tokio::task::JoinSet;
use tokio::time::Instant;

use crate::archive::{Archive, ErrorsWriter, RunStatus};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::provider::{Client, Request};
use crate::translate::TARGET_LANGUAGE;

/// Everything checked before the first request.
struct Plan {
    models: Vec<(ModelConfig, Arc<Client>)>,
    labels: Arc<BTreeMap<String, ResolvedLabelSet>>,
    template: Arc<PromptTemplate>,
}

/// Picks models in the order given, or every configured model except the
/// translation model, in config order.
pub fn select_models(config: &Config, only: Option<&[String]>) -> Result<Vec<ModelConfig>> {
    let chosen: Vec<_> = match only {
        None => config
            .models
            .iter()
            .filter(|m| Some(&m.model_id) != config.run.translation_model.as_ref())
            .cloned()
            .collect(),
        Some(ids) => ids
            .iter()
            .map(|id| config.model(id).cloned().ok_or_else(|| Error::Usage(format!("unknown model {id:?}"))))
            .collect::<Result<_>>()?,
    };
    if chosen.is_empty() {
        return Err(Error::Config("no models configured".into()));
    }
    Ok(chosen)
}

fn plan(config: &Config, logs: &[MaintenanceLog], models: Vec<ModelConfig>) -> Result<Plan> {
    if logs.is_empty() {
        return Err(Error::Usage("the dataset has no logs".into()));
    }
    let mut seen = HashSet::new();
    for l in logs {
        if !seen.insert(&l.log_id) {
            return Err(Error::Usage(format!("duplicate log_id {:?} in dataset", l.log_id)));
        }
    }
    let untranslated = logs.iter().filter(|l| !l.language.eq_ignore_ascii_case(TARGET_LANGUAGE)).count();
    for m in &models {
        if m.expects_translated_input && untranslated > 0 {
            return Err(Error::Usage(format!(
                "model {:?} expects translated input but {untranslated} logs are not in English; run `translate` first",
                m.model_id
            )));
        }
    }
    let mut labels = BTreeMap::new();
    for l in logs {
        if !labels.contains_key(&l.component_code) {
            labels.insert(
                l.component_code.clone(),
                resolve_labels(&l.component_code, &config.label_map, &config.schema)?,
            );
        }
    }
    let models = models.into_iter().map(|m| Client::new(&m).map(|c| (m, c))).collect::<Result<Vec<_>>>()?;
    Ok(Plan { models, labels: Arc::new(labels), template: Arc::new(config.template()) })
}

/// True when no selected model touches the network.
pub fn all_mock(models: &[ModelConfig]) -> bool {
    models.iter().all(|m| m.provider_kind == ProviderKind::Mock)
}

async fn classify_one(
    client: Arc<Client>,
    log: MaintenanceLog,
    labels: Arc<BTreeMap<String, ResolvedLabelSet>>,
    template: Arc<PromptTemplate>,
) -> ResultEntry {
    let set = &labels[&log.component_code];
    let prompt = render_prompt(&log, set, &template);
    let model_id = client.config().model_id.clone();
    let request = Request { key: log.log_id.clone(), prompt, echo_text: log.combined_text() };
    match client.classify(&request).await {
        Ok(reply) => {
            let outcome = match validate_output(&reply.raw_text, set, &log.log_id, &model_id) {
                Ok(out) => Outcome::Output(out),
                Err(f) => Outcome::Failure(f),
            };
            ResultEntry {
                log_id: log.log_id,
                outcome,
                usage: reply.usage,
                attempts: reply.attempts,
                latency: reply.usage.latency,
            }
        }
        Err(f) => ResultEntry {
            outcome: Outcome::Failure(FailureRecord {
                log_id: log.log_id.clone(),
                model_id,
                kind: f.kind,
                detail: f.detail,
                raw_text: f.raw_text,
            }),
            log_id: log.log_id,
            usage: f.usage,
            attempts: f.attempts,
            latency: f.usage.latency,
        },
    }
}

/// Runs one model over `pending` (sorted by log_id) and returns the elapsed
/// seconds. Results are flushed in log_id order whatever the completion
/// order.
async fn run_model(
    archive: &Archive,
    errors: &Mutex<ErrorsWriter>,
    client: Arc<Client>,
    pending: Vec<MaintenanceLog>,
    labels: Arc<BTreeMap<String, ResolvedLabelSet>>,
    template: Arc<PromptTemplate>,
) -> Result<f64> {
    let model_id = client.config().model_id.clone();
    let mut writer = archive.model_writer(&model_id)?;
    let started = Instant::now();
    let mut tasks = JoinSet::new();
    for (i, log) in pending.into_iter().enumerate() {
        let fut = classify_one(client.clone(), log, labels.clone(), template.clone());
        tasks.spawn(async move { (i, fut.await) });
    }
    let mut buffer = BTreeMap::new();
    let mut next = 0;
    while let Some(joined) = tasks.join_next().await {
        let (i, entry) = joined.map_err(|e| Error::Runtime(format!("classification task failed: {e}")))?;
        buffer.insert(i, entry);
        while let Some(entry) = buffer.remove(&next) {
            writer.write(&entry)?;
            if let Some(f) = entry.outcome.failure() {
                errors.lock().expect("errors writer").write(f)?;
            }
            next += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    tracing::info!(model = %model_id, seconds = elapsed, "model finished");
    Ok(elapsed)
}

fn sorted(logs: &[MaintenanceLog]) -> Vec<MaintenanceLog> {
    let mut v = logs.to_vec();
    v.sort_by(|a, b| a.log_id.cmp(&b.log_id));
    v
}

async fn execute(
    archive: &mut Archive,
    plan: Plan,
    logs: &[MaintenanceLog],
    prior: BTreeMap<String, Vec<ResultEntry>>,
    parallel: bool,
) -> Result<()> {
    let errors = Mutex::new(archive.errors_writer()?);
    let logs = sorted(logs);
    let mut jobs = Vec::new();
    for (config, client) in &plan.models {
        if archive.manifest.wall_clock.contains_key(&config.model_id) {
            continue;
        }
        let done: HashSet<&str> =
            prior.get(&config.model_id).map(|v| v.iter().map(|e| e.log_id.as_str()).collect()).unwrap_or_default();
        let pending: Vec<_> = logs.iter().filter(|l| !done.contains(l.log_id.as_str())).cloned().collect();
        // time already spent, spread over the parallel slots
        let earlier: f64 = prior.get(&config.model_id).map_or(0.0, |v| v.iter().map(|e| e.latency).sum::<f64>())
            / f64::from(config.max_parallel.max(1));
        jobs.push((config.model_id.clone(), client.clone(), pending, earlier, !done.is_empty()));
    }

    let mut finished = Vec::new();
    if parallel {
        let futs = jobs.into_iter().map(|(id, client, pending, earlier, resumed)| {
            let (labels, template, errors, archive) = (plan.labels.clone(), plan.template.clone(), &errors, &*archive);
            async move {
                let t = run_model(archive, errors, client, pending, labels, template).await?;
                Ok::<_, Error>((id, t + earlier, resumed))
            }
        });
        for r in futures::future::join_all(futs).await {
            finished.push(r?);
        }
    } else {
        for (id, client, pending, earlier, resumed) in jobs {
            let t = run_model(archive, &errors, client, pending, plan.labels.clone(), plan.template.clone()).await?;
            archive.manifest.wall_clock.insert(id.clone(), t + earlier);
            if resumed {
                archive.manifest.resumed_models.push(id);
            }
            archive.write_manifest()?;
        }
    }
    for (id, t, resumed) in finished {
        archive.manifest.wall_clock.insert(id.clone(), t);
        if resumed {
            archive.manifest.resumed_models.push(id);
        }
    }
    archive.finalize()
}

/// Starts a new run and returns its archive directory.
pub async fn run_benchmark(
    config: &Config,
    logs: &[MaintenanceLog],
    models: Vec<ModelConfig>,
    runs_dir: &Path,
) -> Result<PathBuf> {
    let plan = plan(config, logs, models)?;
    let ids = plan.models.iter().map(|(m, _)| m.model_id.clone()).collect();
    let mut archive = Archive::create(runs_dir, Utc::now(), config, logs, ids)?;
    tracing::info!(run = %archive.run_id(), "archive created");
    execute(&mut archive, plan, logs, BTreeMap::new(), config.run.cross_model_parallel).await?;
    Ok(archive.dir().to_path_buf())
}

/// Continues an interrupted run from its own snapshot and dataset, skipping
/// logs already recorded per model.
pub async fn resume_run(dir: &Path) -> Result<PathBuf> {
    let mut archive = Archive::open(dir)?;
    if archive.manifest.status == RunStatus::Finalized {
        return Err(Error::Usage(format!("run {} is already finalized", archive.run_id())));
    }
    let config = archive.config()?;
    let logs = archive.dataset()?;
    let models = select_models(&config, Some(&archive.manifest.models))?;
    let plan = plan(&config, &logs, models)?;
    let mut prior = BTreeMap::new();
    for id in archive.manifest.models.clone() {
        let entries = archive.recover_results(&id)?;
        if entries.len() == logs.len() && !archive.manifest.wall_clock.contains_key(&id) {
            // complete on disk but interrupted before the manifest update
            let t = entries.iter().map(|e| e.latency).sum::<f64>()
                / f64::from(config.model(&id).map_or(1, |m| m.max_parallel.max(1)));
            archive.manifest.wall_clock.insert(id.clone(), t);
            archive.manifest.resumed_models.push(id.clone());
        }
        prior.insert(id, entries);
    }
    archive.rebuild_derived(&prior)?;
    archive.write_manifest()?;
    let parallel = archive.manifest.cross_model_parallel;
    execute(&mut archive, plan, &logs, prior, parallel).await?;
    Ok(archive.dir().to_path_buf())
}
