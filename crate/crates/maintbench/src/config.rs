//! The single TOML configuration file and its frozen, validated form.
//!
//! Paths inside the file (prompt templates, mock fixtures) resolve relative to
//! the file's directory. The frozen form inlines the templates and stores
//! absolute fixture paths, so a snapshot reloads to the same configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use maintbench_core::cluster::DedupParams;
use maintbench_core::curation::CurationParams;
use maintbench_core::labels::{validate_map, validate_schema};
use maintbench_core::prompt::{PromptTemplate, DEFAULT_TEMPLATE};
use maintbench_core::{ComponentLabelMap, LabelSchema, ModelConfig, ProviderKind};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const DEFAULT_TRANSLATION_TEMPLATE: &str = "\
Translate the following wind turbine maintenance log text from {language} into English. \
Keep component codes, turbine identifiers, numbers and technical terms intact. \
Reply with the translation only.
---
{text}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    /// Path to the classification template, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_template_text: Option<String>,
}

fn default_language() -> String {
    "en".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationSection {
    #[serde(flatten)]
    pub params: CurationParams,
    /// Language tag given to ingested rows without a `language` column.
    #[serde(default = "default_language")]
    pub source_language: String,
}

impl Default for CurationSection {
    fn default() -> Self {
        CurationSection { params: CurationParams::default(), source_language: default_language() }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(flatten)]
    pub params: DedupParams,
}

impl Default for DedupSection {
    fn default() -> Self {
        DedupSection { enabled: true, params: DedupParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// Hash-derived vectors; no network.
    #[default]
    Mock,
    Http,
}

fn default_dimension() -> usize {
    64
}

fn default_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(default)]
    pub kind: EmbeddingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth: Option<String>,
    /// Expected vector length; for the mock embedder, the generated length.
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_embed_retries")]
    pub max_retries: u32,
}

fn default_embed_retries() -> u32 {
    3
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        EmbeddingSection {
            kind: EmbeddingKind::Mock,
            endpoint: None,
            model: None,
            auth: None,
            dimension: default_dimension(),
            batch_size: default_batch(),
            max_retries: default_embed_retries(),
        }
    }
}

fn default_runs_dir() -> String {
    "runs".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_runs_dir")]
    pub runs_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_model: Option<String>,
    /// Run models concurrently; throughput then reflects contention.
    #[serde(default)]
    pub cross_model_parallel: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            runs_dir: default_runs_dir(),
            benchmark_model: None,
            translation_model: None,
            cross_model_parallel: false,
        }
    }
}

/// On-disk layout of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: LabelSchema,
    /// Component legend: code to canonical name.
    #[serde(default)]
    pub components: BTreeMap<String, String>,
    #[serde(default)]
    pub label_map: ComponentLabelMap,
    #[serde(default)]
    pub prompt: PromptSection,
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub curation: CurationSection,
    #[serde(default)]
    pub dedup: DedupSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub run: RunSection,
}

impl Config {
    pub fn model(&self, id: &str) -> Option<&ModelConfig> {
        self.models.iter().find(|m| m.model_id == id)
    }

    pub fn template(&self) -> PromptTemplate {
        PromptTemplate::new(self.prompt.template_text.clone().unwrap_or_else(|| DEFAULT_TEMPLATE.to_string()))
            .expect("validated at load")
    }

    pub fn translation_template(&self) -> &str {
        self.prompt.translation_template_text.as_deref().unwrap_or(DEFAULT_TRANSLATION_TEMPLATE)
    }

    /// Normalized TOML text of the frozen configuration.
    pub fn to_snapshot(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str, path: &Path) -> Result<Config> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse { path: path.to_path_buf(), line, column, message: e.message().to_string() }
    })
}

fn read_relative(base: &Path, rel: &str) -> Result<String> {
    let p = base.join(rel);
    std::fs::read_to_string(&p).at(p)
}

/// Reads, freezes and validates a configuration file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).at(path)?;
    let mut config = parse_config(&text, path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    freeze(&mut config, &base)?;
    validate(&config)?;
    Ok(config)
}

/// Inlines templates and absolutizes fixture paths.
fn freeze(config: &mut Config, base: &Path) -> Result<()> {
    if let Some(rel) = config.prompt.template.take() {
        if config.prompt.template_text.is_some() {
            return Err(Error::Config("prompt.template and prompt.template_text are mutually exclusive".into()));
        }
        config.prompt.template_text = Some(read_relative(base, &rel)?);
    }
    if let Some(rel) = config.prompt.translation_template.take() {
        config.prompt.translation_template_text = Some(read_relative(base, &rel)?);
    }
    if config.prompt.template_text.is_none() {
        config.prompt.template_text = Some(DEFAULT_TEMPLATE.to_string());
    }
    if config.prompt.translation_template_text.is_none() {
        config.prompt.translation_template_text = Some(DEFAULT_TRANSLATION_TEMPLATE.to_string());
    }
    for m in &mut config.models {
        if m.provider_kind == ProviderKind::Mock && !m.endpoint.starts_with("echo:") {
            let p = PathBuf::from(&m.endpoint);
            if p.is_relative() {
                let joined = base.join(p);
                let abs = std::path::absolute(&joined).at(&joined)?;
                m.endpoint = abs.to_string_lossy().into_owned();
            }
        }
    }
    Ok(())
}

fn validate(config: &Config) -> Result<()> {
    validate_schema(&config.schema)?;
    validate_map(&config.label_map, &config.schema)?;
    PromptTemplate::new(config.prompt.template_text.clone().unwrap_or_default())?;
    let tt = config.translation_template();
    if !tt.contains("{text}") {
        return Err(Error::Config("translation template lacks the {text} placeholder".into()));
    }
    config.curation.params.validate()?;
    if config.dedup.enabled {
        config.dedup.params.validate()?;
    }
    let mut ids = BTreeSet::new();
    for m in &config.models {
        let safe = |c: char| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.');
        if m.model_id.is_empty() || m.model_id.starts_with('.') || !m.model_id.chars().all(safe) {
            return Err(Error::Config(format!(
                "model_id {:?} must be non-empty and use only letters, digits, '-', '_' and '.'",
                m.model_id
            )));
        }
        if !ids.insert(m.model_id.as_str()) {
            return Err(Error::Config(format!("duplicate model_id {:?}", m.model_id)));
        }
        if m.price_in.is_sign_negative() || m.price_out.is_sign_negative() {
            return Err(Error::Config(format!("model {:?}: prices must be non-negative", m.model_id)));
        }
        if m.max_parallel == 0 || m.requests_per_minute == 0 {
            return Err(Error::Config(format!(
                "model {:?}: max_parallel and requests_per_minute must be positive",
                m.model_id
            )));
        }
        if m.provider_kind.is_hosted() && m.auth.is_none() {
            return Err(Error::Config(format!(
                "model {:?}: hosted providers need `auth` naming the API-key environment variable",
                m.model_id
            )));
        }
        if m.provider_kind == ProviderKind::Mock
            && !m.endpoint.starts_with("echo:")
            && !Path::new(&m.endpoint).is_file()
        {
            return Err(Error::Config(format!("model {:?}: mock fixture {} not found", m.model_id, m.endpoint)));
        }
    }
    for (what, id) in
        [("benchmark_model", &config.run.benchmark_model), ("translation_model", &config.run.translation_model)]
    {
        if let Some(id) = id {
            if config.model(id).is_none() {
                return Err(Error::Config(format!("run.{what} names unknown model {id:?}")));
            }
        }
    }
    if config.embedding.kind == EmbeddingKind::Http && config.embedding.endpoint.is_none() {
        return Err(Error::Config("embedding.kind = \"http\" needs embedding.endpoint".into()));
    }
    if config.embedding.dimension == 0 || config.embedding.batch_size == 0 {
        return Err(Error::Config("embedding dimension and batch_size must be positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[schema]
schema_version = "t1"
maintenance_types = ["Inspection", "Repair"]
issue_categories = ["Blade Damage", "Oil Leak", "Other"]

[components]
MDA10 = "Rotor Blades"

[label_map.default_rule]
maintenance = { exclude = [] }
issue = { exclude = [] }

[label_map.components.MDA10]
maintenance = { include = ["Inspection"] }
issue = { exclude = ["Oil Leak"] }

[[models]]
model_id = "echo"
provider_kind = "mock"
endpoint = "echo:[EN] "
price_in = 2.5
price_out = "10.00"
"#;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_config_loads_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.toml", MINIMAL);
        let c = load_config(&p).unwrap();
        assert_eq!(c.models[0].price_in, "2.5".parse().unwrap());
        assert_eq!(c.models[0].max_parallel, 4);
        assert!(c.prompt.template_text.is_some());

        let snap = write(dir.path(), "snap.toml", &c.to_snapshot());
        let again = load_config(&snap).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn parse_errors_report_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "bad.toml", "[schema]\nschema_version = \n");
        match load_config(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_label_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let bad = MINIMAL.replace(r#"include = ["Inspection"]"#, r#"include = ["Blade Repairrr"]"#);
        let p = write(dir.path(), "c.toml", &bad);
        let e = load_config(&p).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("Blade Repairrr"), "{e}");
    }

    #[test]
    fn empty_subset_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let bad = MINIMAL.replace(
            r#"[label_map.components.MDA10]"#,
            "[label_map.components.MDX10]\nmaintenance = { exclude = [] }\nissue = { exclude = [\"Blade Damage\", \"Oil Leak\", \"Other\"] }\n\n[label_map.components.MDA10]",
        );
        let p = write(dir.path(), "c.toml", &bad);
        let e = load_config(&p).unwrap_err();
        assert!(e.to_string().contains("MDX10"), "{e}");
    }

    #[test]
    fn unknown_benchmark_model_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{MINIMAL}\n[run]\nbenchmark_model = \"absent\"\n");
        let p = write(dir.path(), "c.toml", &text);
        assert!(load_config(&p).unwrap_err().to_string().contains("absent"));
    }

    #[test]
    fn hosted_model_needs_auth_name() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "{MINIMAL}\n[[models]]\nmodel_id = \"h\"\nprovider_kind = \"openai_compatible\"\nendpoint = \"http://x\"\nprice_in = 0\nprice_out = 0\n"
        );
        let p = write(dir.path(), "c.toml", &text);
        assert!(load_config(&p).unwrap_err().to_string().contains("auth"));
    }
}
