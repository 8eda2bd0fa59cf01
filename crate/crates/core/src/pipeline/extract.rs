use sha2::{Digest, Sha256};

use super::grid::{CellOutcome, CellResult, GridReport};
use super::table::setting;
use super::{
    ensure_supported, run_agents, run_targets, score_document, DocumentRecord, ExperimentConfig, PipelineError,
    Predictions, RunManifest,
};
use crate::corpus::{Dataset, Document, SchemaDescriptor};
use crate::eval::aggregate;
use crate::llm::LlmClient;
use crate::parser::{parse, ParseReport};
use crate::prompt::render_gold;
use crate::task::Task;

const STEP_SEPARATOR: &str = "\n\n----- next agent -----\n\n";

/// Extraction for one task over the whole dataset or a single document.
/// With `agents`, mention detection runs as one chained prompt per type.
/// Unlike [`super::run_grid`], any document failure is returned as an error.
pub fn run_extract(
    dataset: &Dataset,
    task: Task,
    shot_count: usize,
    document_id: Option<&str>,
    agents: Option<&[String]>,
    config: &ExperimentConfig,
    client: &LlmClient,
) -> Result<GridReport, PipelineError> {
    ensure_supported(dataset, &[task])?;
    if agents.is_some() && task != Task::Md {
        return Err(PipelineError::UnknownType(format!(
            "agents only extract mentions, not {task}"
        )));
    }
    let targets: Vec<&Document> = match document_id {
        Some(id) => vec![dataset
            .document(id)
            .ok_or_else(|| PipelineError::UnknownDocument(id.to_string()))?],
        None => dataset.documents.iter().collect(),
    };
    let prompt_config = config.prompt_config(task, &dataset.schema, shot_count);
    let records = match agents {
        None => {
            let cell = format!("{} {}", task.code(), setting(shot_count));

            run_targets(&targets, dataset, &prompt_config, client, &config.model, &cell)?
        }
        Some(types) => {
            let cell = format!("{} agents {}", task.code(), setting(shot_count));
            let mut records = Vec::new();
            for doc in &targets {
                let run = run_agents(doc, &dataset.documents, types, &prompt_config, client, &config.model)?;
                let mut report = ParseReport::default();
                for step in &run.steps {
                    report.items.extend(step.report.items.iter().cloned());
                    report.error_lines.extend(step.report.error_lines.iter().cloned());
                    report.ignored_line_count += step.report.ignored_line_count;
                }
                report.error_count = report.error_lines.len();
                let fingerprints: Vec<&str> = run.steps.iter().map(|s| s.prompt.config_fingerprint.as_str()).collect();
                records.push(DocumentRecord {
                    cell: cell.clone(),
                    task,
                    document_id: doc.id.clone(),
                    prompt_fingerprint: hex::encode(Sha256::digest(fingerprints.join("+").as_bytes())),
                    shot_ids: run.steps.first().map(|s| s.prompt.shot_ids.clone()).unwrap_or_default(),
                    response_text: run
                        .steps
                        .iter()
                        .map(|s| s.response.text.as_str())
                        .collect::<Vec<_>>()
                        .join(STEP_SEPARATOR),
                    retrieved_from_cache: run.steps.iter().all(|s| s.response.retrieved_from_cache),
                    input_token_count: run.steps.iter().map(|s| s.response.input_token_count).sum(),
                    output_token_count: run.steps.iter().map(|s| s.response.output_token_count).sum(),
                    report,
                    counts: score_document(task, &run.predictions, doc, &dataset.schema),
                    predictions: run.predictions,
                    prompt_text: run
                        .steps
                        .iter()
                        .map(|s| s.prompt.text.as_str())
                        .collect::<Vec<_>>()
                        .join(STEP_SEPARATOR),
                });
            }
            records
        }
    };
    let counts: Vec<_> = records.iter().map(|r| r.counts).collect();
    let parse_errors = records.iter().map(|r| r.report.error_count).sum();
    let cells = vec![CellResult {
        task,
        shot_count,
        outcome: CellOutcome::Scored {
            scores: aggregate(&counts),
            parse_errors,
        },
    }];
    let variants = agents.map(|t| t.to_vec()).unwrap_or_default();
    let manifest = RunManifest::new(
        "extract",
        dataset,
        &[task],
        &[shot_count],
        config,
        client.mode(),
        variants,
        &records,
    );
    Ok(GridReport {
        dataset_name: dataset.schema.dataset_name.clone(),
        cells,
        records,
        manifest,
    })
}

/// Predictions for `gold` read from another annotation of the same text:
/// the annotations are written out as output lines and parsed and grounded
/// like a model answer.
pub fn predictions_from_annotations(
    annotated: &Document,
    gold: &Document,
    task: Task,
    schema: &SchemaDescriptor,
) -> Predictions {
    let report = parse(&render_gold(annotated, task, schema).join("\n"), task, schema);
    Predictions::from_report(&report, gold)
}
