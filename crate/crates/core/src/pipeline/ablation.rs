use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::table::ablation_table;
use super::{ensure_supported, run_documents, DocumentRecord, ExperimentConfig, PipelineError, RunManifest};
use crate::corpus::Dataset;
use crate::eval::aggregate;
use crate::llm::LlmClient;
use crate::prompt::ablation_variants;
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub absolute_f1: f64,
    /// Absolute F1 minus the baseline's.
    pub relative_f1: f64,
    pub parsing_errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTaskReport {
    pub task: Task,
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub dataset_name: String,
    pub shot_count: usize,
    pub tasks: Vec<AblationTaskReport>,
    pub records: Vec<DocumentRecord>,
    pub manifest: RunManifest,
}

impl AblationReport {
    /// `task → label → row`.
    pub fn scores_json(&self) -> Value {
        let mut tasks: BTreeMap<&str, BTreeMap<&str, &AblationRow>> = BTreeMap::new();
        for t in &self.tasks {
            tasks.insert(t.task.code(), t.rows.iter().map(|r| (r.label.as_str(), r)).collect());
        }
        json!({ "dataset": self.dataset_name, "shot_count": self.shot_count, "tasks": tasks })
    }

    pub fn table(&self) -> String {
        ablation_table(self)
    }

    pub fn has_failures(&self) -> bool {
        self.tasks.iter().flat_map(|t| &t.rows).any(|r| r.error.is_some())
    }
}

/// Runs the baseline prompt and each single-component removal for every
/// task. A failing variant is marked in its row; the others still run.
pub fn run_ablation(
    dataset: &Dataset,
    tasks: &[Task],
    config: &ExperimentConfig,
    shot_count: usize,
    client: &LlmClient,
) -> Result<AblationReport, PipelineError> {
    ensure_supported(dataset, tasks)?;
    let mut reports = Vec::new();
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for &task in tasks {
        let base = config.prompt_config(task, &dataset.schema, shot_count);
        let mut rows: Vec<AblationRow> = Vec::new();
        for (label, variant) in ablation_variants(&base)? {
            let cell = format!("{} {label}", task.code());
            let row = match run_documents(dataset, &variant, client, &config.model, &cell) {
                Ok(docs) => {
                    let counts: Vec<_> = docs.iter().map(|r| r.counts).collect();
                    let parsing_errors = docs.iter().map(|r| r.report.error_count).sum();
                    records.extend(docs);
                    let absolute_f1 = aggregate(&counts).f1;
                    let baseline = rows.first().map_or(absolute_f1, |b| b.absolute_f1);
                    AblationRow {
                        label: label.clone(),
                        absolute_f1,
                        relative_f1: absolute_f1 - baseline,
                        parsing_errors,
                        error: None,
                    }
                }
                Err(e) => AblationRow {
                    label: label.clone(),
                    absolute_f1: 0.0,
                    relative_f1: 0.0,
                    parsing_errors: 0,
                    error: Some(e.to_string()),
                },
            };
            if !labels.contains(&label) {
                labels.push(label);
            }
            rows.push(row);
        }
        reports.push(AblationTaskReport { task, rows });
    }
    let manifest = RunManifest::new(
        "ablation",
        dataset,
        tasks,
        &[shot_count],
        config,
        client.mode(),
        labels,
        &records,
    );
    Ok(AblationReport {
        dataset_name: dataset.schema.dataset_name.clone(),
        shot_count,
        tasks: reports,
        records,
        manifest,
    })
}
