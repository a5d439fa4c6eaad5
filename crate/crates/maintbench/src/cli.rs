//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use maintbench_core::GroundTruthSource;

use crate::archive::{resolve_run, Archive};
use crate::config::{load_config, Config};
use crate::curate::curate;
use crate::dataset::{read_logs, write_logs};
use crate::error::{Error, IoContext, Result};
use crate::provider::Client;
use crate::render::{analyze, report, Format};
use crate::runner::{all_mock, resume_run, run_benchmark, select_models};
use crate::translate::translate_corpus;

/// Suffix of the sidecar holding pre-translation text.
pub const ORIGINALS_SUFFIX: &str = "originals.csv";

#[derive(Debug, Parser)]
#[command(name = "maintbench", version, about = "Benchmark LLM classifiers on wind turbine maintenance logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunLocation {
    /// Run id under the runs directory, or a path to a run directory.
    #[arg(long)]
    pub run: String,
    #[arg(long, default_value = "runs")]
    pub runs_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize, de-duplicate and balance a raw log export.
    Curate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Seed for every sampling stage; defaults to the configured seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Translate non-English logs with a configured model.
    Translate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        config: PathBuf,
    },
    /// Classify every log with every selected model into a new run archive.
    Run {
        #[arg(long, required_unless_present = "resume")]
        dataset: Option<PathBuf>,
        #[arg(long, required_unless_present = "resume")]
        config: Option<PathBuf>,
        /// Comma-separated model ids; all configured models by default.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Continue an interrupted run from its archived snapshot and dataset.
        #[arg(long, conflicts_with_all = ["dataset", "config", "models"])]
        resume: Option<String>,
        /// Overrides the configured runs directory.
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
    /// Compute metrics for a finalized run.
    Analyze {
        #[command(flatten)]
        location: RunLocation,
        /// benchmark:<model_id>, consensus or human.
        #[arg(long)]
        truth: GroundTruthSource,
        #[arg(long, default_value = "reports")]
        reports_dir: PathBuf,
    },
    /// Render an analyzed run.
    Report {
        #[command(flatten)]
        location: RunLocation,
        #[arg(long, value_enum)]
        format: Format,
        /// Which analysis to render; the most recent one by default.
        #[arg(long)]
        truth: Option<GroundTruthSource>,
        #[arg(long, default_value = "reports")]
        reports_dir: PathBuf,
    },
    /// Serve the review API for a finalized run.
    Serve {
        #[command(flatten)]
        location: RunLocation,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory with the review UI build.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Load and check a configuration file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value).expect("reports serialize") + "\n").at(path)
}

fn runtime(virtual_time: bool) -> Result<tokio::runtime::Runtime> {
    let built = if virtual_time {
        // mock latencies and backoff elapse in virtual time, so throughput is reproducible
        tokio::runtime::Builder::new_current_thread().enable_all().start_paused(true).build()
    } else {
        tokio::runtime::Builder::new_multi_thread().enable_all().build()
    };
    built.map_err(|e| Error::Runtime(format!("cannot start runtime: {e}")))
}

fn translation_model(config: &Config, id: Option<&str>) -> Result<maintbench_core::ModelConfig> {
    let id = id
        .or(config.run.translation_model.as_deref())
        .ok_or_else(|| Error::Usage("no translation model: pass --model or set run.translation_model".into()))?;
    config.model(id).cloned().ok_or_else(|| Error::Usage(format!("unknown model {id:?}")))
}

/// Executes a parsed command and returns the paths it produced.
pub fn execute(command: Command) -> Result<Vec<PathBuf>> {
    match command {
        Command::ValidateConfig { config } => {
            load_config(&config)?;
            Ok(vec![config])
        }
        Command::Curate { input, out, config, seed } => {
            let config = load_config(&config)?;
            let ingested = read_logs(&input, &config.curation.source_language)?;
            let virtual_time = config.embedding.kind == crate::config::EmbeddingKind::Mock;
            let (logs, curation) = runtime(virtual_time)?.block_on(curate(ingested, &config, seed))?;
            write_logs(&out, &logs)?;
            let report_path = sidecar(&out, "report.json");
            write_json(&report_path, &curation)?;
            Ok(vec![out, report_path])
        }
        Command::Translate { input, out, model, config } => {
            let config = load_config(&config)?;
            let model = translation_model(&config, model.as_deref())?;
            let logs = read_logs(&input, &config.curation.source_language)?.logs;
            let client = Client::new(&model)?;
            let template = config.translation_template().to_string();
            let (translated, report) =
                runtime(all_mock(std::slice::from_ref(&model)))?.block_on(translate_corpus(&logs, &client, &template));
            write_logs(&out, &translated)?;
            let originals: Vec<_> = logs
                .iter()
                .zip(&translated)
                .filter(|(a, b)| a.provenance != b.provenance)
                .map(|(a, _)| a.clone())
                .collect();
            let originals_path = sidecar(&out, ORIGINALS_SUFFIX);
            write_logs(&originals_path, &originals)?;
            let report_path = sidecar(&out, "translation.json");
            write_json(&report_path, &report)?;
            Ok(vec![out, originals_path, report_path])
        }
        Command::Run { resume: Some(run), runs_dir, .. } => {
            let runs_dir = runs_dir.unwrap_or_else(|| PathBuf::from("runs"));
            let dir = resolve_run(&runs_dir, &run)?;
            let archive = Archive::open(&dir)?;
            let config = archive.config()?;
            let models = select_models(&config, Some(&archive.manifest.models))?;
            let path = runtime(all_mock(&models))?.block_on(resume_run(&dir))?;
            Ok(vec![path])
        }
        Command::Run { dataset, config, models, resume: None, runs_dir } => {
            let (Some(dataset), Some(config_path)) = (dataset, config) else {
                return Err(Error::Usage("run needs --dataset and --config".into()));
            };
            let config = load_config(&config_path)?;
            let logs = read_logs(&dataset, &config.curation.source_language)?.logs;
            let models = select_models(&config, models.as_deref())?;
            let runs_dir = runs_dir.unwrap_or_else(|| PathBuf::from(&config.run.runs_dir));
            let path = runtime(all_mock(&models))?.block_on(run_benchmark(&config, &logs, models, &runs_dir))?;
            let originals = sidecar(&dataset, ORIGINALS_SUFFIX);
            if originals.is_file() {
                let target = path.join(format!("dataset.{ORIGINALS_SUFFIX}"));
                std::fs::copy(&originals, &target).at(&target)?;
            }
            Ok(vec![path])
        }
        Command::Analyze { location, truth, reports_dir } => {
            let dir = resolve_run(&location.runs_dir, &location.run)?;
            Ok(vec![analyze(&dir, &truth, &reports_dir)?])
        }
        Command::Report { location, format, truth, reports_dir } => {
            let dir = resolve_run(&location.runs_dir, &location.run)?;
            Ok(vec![report(&dir, &reports_dir, truth.as_ref(), format)?])
        }
        Command::Serve { location, port, assets } => {
            let dir = resolve_run(&location.runs_dir, &location.run)?;
            runtime(false)?.block_on(crate::serve::serve(&dir, port, assets))?;
            Ok(vec![])
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Produced paths go to stdout; errors go to stderr as one JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{body}");
            e.exit_code()
        }
    }
}
