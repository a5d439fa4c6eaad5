//! On-disk run archives.
//!
//! ```text
//! runs/<UTC timestamp>[-N]/
//!   config.snapshot          frozen configuration (TOML)
//!   dataset.csv              the exact logs sent to the models
//!   run.json                 manifest: status, models, per-model wall clock
//!   results/<model_id>.jsonl one record per log, ascending log_id
//!   usage/<model_id>.jsonl   token counts and latency per log
//!   errors.jsonl             every failure record
//!   reviews.jsonl            human verdicts, append-only
//! ```
//!
//! Finalized archives are read-only; only `reviews.jsonl` keeps growing.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use maintbench_core::{FailureRecord, MaintenanceLog, ModelResults, ResultEntry, ReviewRecord};
use serde::{Deserialize, Serialize};

use crate::config::{parse_config, Config};
use crate::dataset::{parse_logs, write_logs};
use crate::error::{Error, IoContext, Result};

pub const CONFIG_SNAPSHOT: &str = "config.snapshot";
pub const DATASET: &str = "dataset.csv";
pub const MANIFEST: &str = "run.json";
pub const RESULTS_DIR: &str = "results";
pub const USAGE_DIR: &str = "usage";
pub const ERRORS: &str = "errors.jsonl";
pub const REVIEWS: &str = "reviews.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub status: RunStatus,
    pub created_at: String,
    pub n_logs: usize,
    /// Models in run order.
    pub models: Vec<String>,
    /// Seconds per completed model.
    #[serde(default)]
    pub wall_clock: BTreeMap<String, f64>,
    #[serde(default)]
    pub cross_model_parallel: bool,
    /// Set when a wall clock spans a resumed session and is approximate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resumed_models: Vec<String>,
}

/// One line of a usage file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageLine {
    pub log_id: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub latency: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub estimated: bool,
    pub attempts: u32,
}

impl From<&ResultEntry> for UsageLine {
    fn from(e: &ResultEntry) -> Self {
        UsageLine {
            log_id: e.log_id.clone(),
            tokens_in: e.usage.tokens_in,
            tokens_out: e.usage.tokens_out,
            latency: e.usage.latency,
            estimated: e.usage.estimated,
            attempts: e.attempts,
        }
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("archive records serialize");
    s.push('\n');
    s
}

fn append_file(path: &Path) -> Result<File> {
    OpenOptions::new().create(true).append(true).open(path).at(path)
}

pub fn timestamp_id(now: DateTime<Utc>) -> String {
    now.format("%Y%m%dT%H%M%SZ").to_string()
}

/// Finds a run directory by id under `runs_dir`, or takes `run` as a path.
pub fn resolve_run(runs_dir: &Path, run: &str) -> Result<PathBuf> {
    let by_id = runs_dir.join(run);
    if by_id.join(MANIFEST).is_file() {
        return Ok(by_id);
    }
    let as_path = PathBuf::from(run);
    if as_path.join(MANIFEST).is_file() {
        return Ok(as_path);
    }
    Err(Error::Usage(format!("unknown run {run:?}: no archive under {}", runs_dir.display())))
}

#[derive(Debug)]
pub struct Archive {
    dir: PathBuf,
    pub manifest: Manifest,
}

impl Archive {
    /// Creates `runs_dir/<timestamp>`, adding `-1`, `-2`, ... on collision,
    /// and writes the snapshot, dataset and manifest.
    pub fn create(
        runs_dir: &Path,
        now: DateTime<Utc>,
        config: &Config,
        logs: &[MaintenanceLog],
        models: Vec<String>,
    ) -> Result<Archive> {
        std::fs::create_dir_all(runs_dir).at(runs_dir)?;
        let base = timestamp_id(now);
        let mut run_id = base.clone();
        let mut n = 0;
        let dir = loop {
            let dir = runs_dir.join(&run_id);
            match std::fs::create_dir(&dir) {
                Ok(()) => break dir,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    n += 1;
                    run_id = format!("{base}-{n}");
                }
                Err(e) => return Err(Error::Io { path: dir, source: e }),
            }
        };
        for sub in [RESULTS_DIR, USAGE_DIR] {
            std::fs::create_dir(dir.join(sub)).at(dir.join(sub))?;
        }
        std::fs::write(dir.join(CONFIG_SNAPSHOT), config.to_snapshot()).at(dir.join(CONFIG_SNAPSHOT))?;
        write_logs(&dir.join(DATASET), logs)?;
        for f in [ERRORS, REVIEWS] {
            File::create(dir.join(f)).at(dir.join(f))?;
        }
        let archive = Archive {
            manifest: Manifest {
                run_id,
                status: RunStatus::Running,
                created_at: now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                n_logs: logs.len(),
                models,
                wall_clock: BTreeMap::new(),
                cross_model_parallel: config.run.cross_model_parallel,
                resumed_models: Vec::new(),
            },
            dir,
        };
        archive.write_manifest()?;
        Ok(archive)
    }

    pub fn open(dir: &Path) -> Result<Archive> {
        let p = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&p).at(&p)?;
        let manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(Archive { dir: dir.to_path_buf(), manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn run_id(&self) -> &str {
        &self.manifest.run_id
    }

    pub fn results_path(&self, model_id: &str) -> PathBuf {
        self.dir.join(RESULTS_DIR).join(format!("{model_id}.jsonl"))
    }

    pub fn usage_path(&self, model_id: &str) -> PathBuf {
        self.dir.join(USAGE_DIR).join(format!("{model_id}.jsonl"))
    }

    pub fn reviews_path(&self) -> PathBuf {
        self.dir.join(REVIEWS)
    }

    pub fn write_manifest(&self) -> Result<()> {
        let p = self.dir.join(MANIFEST);
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n")
            .at(&tmp)?;
        std::fs::rename(&tmp, &p).at(&p)
    }

    pub fn config(&self) -> Result<Config> {
        let p = self.dir.join(CONFIG_SNAPSHOT);
        let text = std::fs::read_to_string(&p).at(&p)?;
        parse_config(&text, &p)
    }

    pub fn dataset(&self) -> Result<Vec<MaintenanceLog>> {
        let p = self.dir.join(DATASET);
        let text = std::fs::read_to_string(&p).at(&p)?;
        Ok(parse_logs(&text, &p, "en")?.logs)
    }

    /// Reads the results file; a torn final line is an error.
    pub fn results(&self, model_id: &str) -> Result<Vec<ResultEntry>> {
        let p = self.results_path(model_id);
        let (entries, valid, total) = read_prefix(&p)?;
        if valid != total {
            return Err(Error::Dataset { path: p, message: format!("unreadable record after byte {valid}") });
        }
        Ok(entries)
    }

    /// Truncates a results file to its longest readable prefix and returns it.
    pub fn recover_results(&self, model_id: &str) -> Result<Vec<ResultEntry>> {
        let p = self.results_path(model_id);
        if !p.exists() {
            return Ok(Vec::new());
        }
        let (entries, valid, total) = read_prefix(&p)?;
        if valid != total {
            tracing::warn!(path = %p.display(), dropped = total - valid, "dropping torn results tail");
            let f = OpenOptions::new().write(true).open(&p).at(&p)?;
            f.set_len(valid).at(&p)?;
        }
        Ok(entries)
    }

    /// Results for every model, wall clocks from the manifest.
    pub fn model_results(&self) -> Result<Vec<ModelResults>> {
        let mut out = Vec::new();
        for id in &self.manifest.models {
            let entries = self.results(id)?;
            if entries.len() != self.manifest.n_logs {
                return Err(Error::Runtime(format!(
                    "results for {id} cover {} of {} logs; the run is incomplete",
                    entries.len(),
                    self.manifest.n_logs
                )));
            }
            let wall_clock = self.manifest.wall_clock.get(id).copied().unwrap_or(0.0);
            out.push(ModelResults { model_id: id.clone(), entries, wall_clock });
        }
        Ok(out)
    }

    pub fn reviews(&self) -> Result<Vec<ReviewRecord>> {
        Ok(ReviewLog::read(&self.reviews_path())?.0)
    }

    pub fn model_writer(&self, model_id: &str) -> Result<ModelWriter> {
        Ok(ModelWriter {
            results: append_file(&self.results_path(model_id))?,
            usage: append_file(&self.usage_path(model_id))?,
            results_path: self.results_path(model_id),
        })
    }

    pub fn errors_writer(&self) -> Result<ErrorsWriter> {
        let p = self.dir.join(ERRORS);
        Ok(ErrorsWriter { file: append_file(&p)?, path: p })
    }

    /// Rewrites usage and error files from the results files.
    pub fn rebuild_derived(&self, results: &BTreeMap<String, Vec<ResultEntry>>) -> Result<()> {
        let mut errors = String::new();
        for id in &self.manifest.models {
            let entries = results.get(id).map(Vec::as_slice).unwrap_or_default();
            let usage: String = entries.iter().map(|e| json_line(&UsageLine::from(e))).collect();
            std::fs::write(self.usage_path(id), usage).at(self.usage_path(id))?;
            for f in entries.iter().filter_map(|e| e.outcome.failure()) {
                errors.push_str(&json_line(f));
            }
        }
        std::fs::write(self.dir.join(ERRORS), errors).at(self.dir.join(ERRORS))
    }

    /// Marks the run finalized and makes everything but the reviews file
    /// read-only.
    pub fn finalize(&mut self) -> Result<()> {
        self.manifest.status = RunStatus::Finalized;
        self.write_manifest()?;
        let mut files = vec![
            self.dir.join(CONFIG_SNAPSHOT),
            self.dir.join(DATASET),
            self.dir.join(MANIFEST),
            self.dir.join(ERRORS),
        ];
        for id in &self.manifest.models {
            files.push(self.results_path(id));
            files.push(self.usage_path(id));
        }
        for f in files {
            if f.exists() {
                let mut perm = std::fs::metadata(&f).at(&f)?.permissions();
                perm.set_readonly(true);
                std::fs::set_permissions(&f, perm).at(&f)?;
            }
        }
        Ok(())
    }
}

/// Parses JSON lines until the first unreadable one. Returns the records,
/// the byte length of the readable prefix and the file length.
fn read_prefix<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(Vec<T>, u64, u64)> {
    let file = File::open(path).at(path)?;
    let total = file.metadata().at(path)?.len();
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut valid = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).at(path)?;
        if n == 0 || !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str(line.trim_end()) {
            Ok(v) => out.push(v),
            Err(_) if line.trim().is_empty() => {}
            Err(_) => break,
        }
        valid += n as u64;
    }
    Ok((out, valid, total))
}

/// Writer for one model's results and usage files.
pub struct ModelWriter {
    results: File,
    usage: File,
    results_path: PathBuf,
}

impl ModelWriter {
    pub fn write(&mut self, entry: &ResultEntry) -> Result<()> {
        self.results.write_all(json_line(entry).as_bytes()).at(&self.results_path)?;
        self.usage.write_all(json_line(&UsageLine::from(entry)).as_bytes()).at(&self.results_path)?;
        Ok(())
    }
}

pub struct ErrorsWriter {
    file: File,
    path: PathBuf,
}

impl ErrorsWriter {
    pub fn write(&mut self, failure: &FailureRecord) -> Result<()> {
        self.file.write_all(json_line(failure).as_bytes()).at(&self.path)
    }
}

/// The append-only reviews file and its parsed contents.
pub struct ReviewLog {
    file: File,
    path: PathBuf,
    records: Vec<ReviewRecord>,
}

impl ReviewLog {
    /// Records in file order and the readable byte length.
    fn read(path: &Path) -> Result<(Vec<ReviewRecord>, u64)> {
        if !path.exists() {
            return Ok((Vec::new(), 0));
        }
        let (records, valid, total) = read_prefix(path)?;
        if valid != total {
            tracing::warn!(path = %path.display(), "ignoring torn reviews tail");
        }
        Ok((records, valid))
    }

    pub fn open(path: &Path) -> Result<ReviewLog> {
        let (records, valid) = Self::read(path)?;
        let file = OpenOptions::new().create(true).truncate(false).read(true).write(true).open(path).at(path)?;
        // drop a torn tail so the next record starts on a fresh line
        file.set_len(valid).at(path)?;
        let mut file = file;
        std::io::Seek::seek(&mut file, std::io::SeekFrom::End(0)).at(path)?;
        Ok(ReviewLog { file, path: path.to_path_buf(), records })
    }

    pub fn records(&self) -> &[ReviewRecord] {
        &self.records
    }

    /// Appends and syncs the record to disk before returning.
    pub fn append(&mut self, record: ReviewRecord) -> Result<()> {
        self.file.write_all(json_line(&record).as_bytes()).at(&self.path)?;
        self.file.sync_data().at(&self.path)?;
        self.records.push(record);
        Ok(())
    }
}
