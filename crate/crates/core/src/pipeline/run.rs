use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DocumentRecord, ExperimentConfig, ModelSettings, PipelineError};
use crate::corpus::Dataset;
use crate::llm::{now_unix, CacheMode};
use crate::prompt::{PromptTemplate, ShotStrategy};
use crate::task::Task;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to rerun an experiment in replay mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// `grid`, `ablation`, `extract` or `agents`.
    pub kind: String,
    pub dataset_name: String,
    pub tasks: Vec<Task>,
    pub model_id: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
    pub shot_counts: Vec<usize>,
    pub shot_seed: u64,
    pub shot_strategy: ShotStrategy,
    pub cache_mode: CacheMode,
    pub template_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
    /// Cell → document id → prompt fingerprint.
    pub prompt_fingerprints: BTreeMap<String, BTreeMap<String, String>>,
    /// Unix seconds; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub toolkit_version: String,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        kind: &str,
        dataset: &Dataset,
        tasks: &[Task],
        shot_counts: &[usize],
        config: &ExperimentConfig,
        cache_mode: CacheMode,
        variants: Vec<String>,
        records: &[DocumentRecord],
    ) -> Self {
        let mut prompt_fingerprints: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for r in records {
            prompt_fingerprints
                .entry(r.cell.clone())
                .or_default()
                .insert(r.document_id.clone(), r.prompt_fingerprint.clone());
        }
        RunManifest {
            kind: kind.to_string(),
            dataset_name: dataset.schema.dataset_name.clone(),
            tasks: tasks.to_vec(),
            model_id: config.model.model_id.clone(),
            temperature: config.model.temperature,
            max_output_tokens: config.model.max_output_tokens,
            shot_counts: shot_counts.to_vec(),
            shot_seed: config.shot_seed,
            shot_strategy: config.shot_strategy,
            cache_mode,
            template_digest: config.template.digest(),
            variants,
            prompt_fingerprints,
            timestamp: now_unix(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
        }
    }

    /// The experiment settings to rerun this manifest with `template`,
    /// which must be the template the run was made with.
    pub fn experiment_config(&self, template: PromptTemplate) -> Result<ExperimentConfig, PipelineError> {
        if template.digest() != self.template_digest {
            return Err(PipelineError::Manifest(format!(
                "template digest {} does not match the manifest's {}",
                template.digest(),
                self.template_digest
            )));
        }
        Ok(ExperimentConfig {
            template,
            model: ModelSettings {
                model_id: self.model_id.clone(),
                temperature: self.temperature,
                max_output_tokens: self.max_output_tokens,
            },
            shot_seed: self.shot_seed,
            shot_strategy: self.shot_strategy,
        })
    }

    /// Content hash of the manifest without its timestamp, so reruns of
    /// the same experiment land in the same directory.
    pub fn id(&self) -> String {
        let mut stable = self.clone();
        stable.timestamp = 0;
        let json = serde_json::to_string(&stable).expect("manifest serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

fn slug(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '_' {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn write(path: &Path, content: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, content).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
}

/// Writes `<root>/<manifest id>/` with `manifest.json`, `prompts/`,
/// `responses/`, `predictions.jsonl`, `scores.json` and `table.txt`, and
/// returns the run directory.
pub fn write_run(
    root: &Path,
    manifest: &RunManifest,
    records: &[DocumentRecord],
    scores: &serde_json::Value,
    table: &str,
) -> Result<PathBuf, PipelineError> {
    let id = manifest.id();
    let dir = root.join(&id);
    // A replay rerun keeps the first run's timestamp so every file comes out
    // byte-identical.
    let previous = fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|text| serde_json::from_str::<RunManifest>(&text).ok())
        .filter(|m| manifest.cache_mode == CacheMode::Replay && m.id() == id);
    let manifest = match previous {
        Some(m) => RunManifest {
            timestamp: m.timestamp,
            ..manifest.clone()
        },
        None => manifest.clone(),
    };
    write(&dir.join("manifest.json"), &pretty(&manifest))?;
    let mut lines = String::new();
    for r in records {
        let (cell, doc) = (slug(&r.cell), slug(&r.document_id));
        write(
            &dir.join("prompts").join(&cell).join(format!("{doc}.txt")),
            &r.prompt_text,
        )?;
        write(
            &dir.join("responses").join(&cell).join(format!("{doc}.txt")),
            &r.response_text,
        )?;
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    write(&dir.join("predictions.jsonl"), &lines)?;
    write(&dir.join("scores.json"), &pretty(scores))?;
    write(&dir.join("table.txt"), table)?;
    Ok(dir)
}
