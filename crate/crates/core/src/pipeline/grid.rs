use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::table::{grid_table, setting};
use super::{ensure_supported, run_documents, Baselines, DocumentRecord, ExperimentConfig, PipelineError, RunManifest};
use crate::corpus::Dataset;
use crate::eval::{aggregate, TaskScores};
use crate::llm::LlmClient;
use crate::task::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Scored { scores: TaskScores, parse_errors: usize },
    Failed { error: String, provider_error: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub task: Task,
    pub shot_count: usize,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub dataset_name: String,
    pub cells: Vec<CellResult>,
    pub records: Vec<DocumentRecord>,
    pub manifest: RunManifest,
}

impl GridReport {
    /// `task → shot count → {precision, recall, f1, counts, parse_errors}`;
    /// failed cells carry an `error` instead.
    pub fn scores_json(&self) -> Value {
        let mut tasks: BTreeMap<String, BTreeMap<String, Value>> = BTreeMap::new();
        for c in &self.cells {
            let value = match &c.outcome {
                CellOutcome::Scored { scores, parse_errors } => json!({
                    "precision": scores.precision,
                    "recall": scores.recall,
                    "f1": scores.f1,
                    "counts": scores.counts,
                    "parse_errors": parse_errors,
                }),
                CellOutcome::Failed { error, .. } => json!({ "error": error }),
            };
            tasks
                .entry(c.task.code().to_string())
                .or_default()
                .insert(c.shot_count.to_string(), value);
        }
        json!({ "dataset": self.dataset_name, "tasks": tasks })
    }

    pub fn table(&self, baselines: &Baselines) -> String {
        grid_table(self, baselines)
    }

    /// The first failed cell, if any.
    pub fn first_failure(&self) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| matches!(c.outcome, CellOutcome::Failed { .. }))
    }
}

/// Scores every (task, shot count) cell over the whole dataset, each
/// document prompted with leave-one-out shots. A failing cell is recorded
/// and the rest still run; only an unsupported task is an error. An empty
/// dataset yields no cells.
pub fn run_grid(
    dataset: &Dataset,
    tasks: &[Task],
    shot_counts: &[usize],
    config: &ExperimentConfig,
    client: &LlmClient,
) -> Result<GridReport, PipelineError> {
    ensure_supported(dataset, tasks)?;
    let mut cells = Vec::new();
    let mut records = Vec::new();
    if !dataset.documents.is_empty() {
        for &task in tasks {
            for &shots in shot_counts {
                let cell = format!("{} {}", task.code(), setting(shots));
                let prompt_config = config.prompt_config(task, &dataset.schema, shots);
                let outcome = match run_documents(dataset, &prompt_config, client, &config.model, &cell) {
                    Ok(docs) => {
                        let counts: Vec<_> = docs.iter().map(|r| r.counts).collect();
                        let parse_errors = docs.iter().map(|r| r.report.error_count).sum();
                        records.extend(docs);
                        CellOutcome::Scored {
                            scores: aggregate(&counts),
                            parse_errors,
                        }
                    }
                    Err(e) => CellOutcome::Failed {
                        error: e.to_string(),
                        provider_error: e.is_provider_error(),
                    },
                };
                cells.push(CellResult {
                    task,
                    shot_count: shots,
                    outcome,
                });
            }
        }
    }
    let manifest = RunManifest::new(
        "grid",
        dataset,
        tasks,
        shot_counts,
        config,
        client.mode(),
        Vec::new(),
        &records,
    );
    Ok(GridReport {
        dataset_name: dataset.schema.dataset_name.clone(),
        cells,
        records,
        manifest,
    })
}
