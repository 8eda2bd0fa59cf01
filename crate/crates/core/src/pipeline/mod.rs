//! Experiment orchestration: per-document extraction, the shot-count grid,
//! the prompt ablation and the chained per-type "agents" extraction.

mod ablation;
mod agents;
mod extract;
mod grid;
mod run;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Document, Entity, Mention, Relation, SchemaDescriptor};
use crate::eval::{score_constraints, score_er, score_md, score_re, ConfusionCounts};
use crate::llm::{approximate_tokens, ChatRequest, ChatResponse, Completion, LlmClient, LlmError, Provider};
use crate::parser::{
    format_line, ground_clusters, ground_relations, ground_report, parse, Endpoint, GroundedCluster, GroundedMention,
    GroundedRelation, ParseReport, ParsedConstraint, ParsedMention, Span,
};
use crate::prompt::{
    assemble, render_gold, PromptConfig, PromptError, PromptTemplate, RenderedPrompt, ShotStrategy,
    AGENT_CONTEXT_DELIMITER, INPUT_DELIMITER,
};
use crate::task::Task;

pub use ablation::{run_ablation, AblationReport, AblationRow, AblationTaskReport};
pub use agents::{run_agents, AgentRun, AgentStep};
pub use extract::{predictions_from_annotations, run_extract};
pub use grid::{run_grid, CellOutcome, CellResult, GridReport};
pub use run::{write_run, RunManifest, TOOLKIT_VERSION};
pub use table::{Baselines, ReferenceScores};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("dataset {dataset} has no {task} annotations")]
    UnsupportedTask { dataset: String, task: Task },
    #[error("unknown mention type `{0}`")]
    UnknownType(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{0}")]
    Io(String),
    #[error("no document `{0}` in the dataset")]
    UnknownDocument(String),
    #[error("manifest: {0}")]
    Manifest(String),
}

impl PipelineError {
    /// Whether the failure came from the model provider or the cache.
    pub fn is_provider_error(&self) -> bool {
        matches!(self, PipelineError::Llm(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model_id: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            model_id: "gpt-4o".into(),
            temperature: 0.0,
            max_output_tokens: None,
        }
    }
}

/// Settings shared by every prompt of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub template: PromptTemplate,
    pub model: ModelSettings,
    pub shot_seed: u64,
    pub shot_strategy: ShotStrategy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            template: PromptTemplate::default(),
            model: ModelSettings::default(),
            shot_seed: 0,
            shot_strategy: ShotStrategy::PerDocument,
        }
    }
}

impl ExperimentConfig {
    pub fn prompt_config(&self, task: Task, schema: &SchemaDescriptor, shot_count: usize) -> PromptConfig {
        let mut config =
            PromptConfig::full(task, schema.clone(), self.template.clone()).with_shots(shot_count, self.shot_seed);
        config.shot_strategy = self.shot_strategy;
        config
    }
}

/// Grounded model output for one document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictions {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<GroundedMention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ungrounded_mentions: Vec<ParsedMention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<GroundedCluster>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<GroundedRelation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ParsedConstraint>,
}

impl Predictions {
    pub fn from_report(report: &ParseReport, doc: &Document) -> Self {
        let (mentions, ungrounded_mentions) = ground_report(report, doc);
        Predictions {
            mentions,
            ungrounded_mentions,
            clusters: ground_clusters(report, doc),
            relations: ground_relations(report, doc),
            constraints: report.constraints().cloned().collect(),
        }
    }

    pub fn extend(&mut self, other: Predictions) {
        self.mentions.extend(other.mentions);
        self.ungrounded_mentions.extend(other.ungrounded_mentions);
        self.clusters.extend(other.clusters);
        self.relations.extend(other.relations);
        self.constraints.extend(other.constraints);
    }

    /// The document annotated with these predictions instead of its own
    /// annotations. Relation and cluster endpoints resolve to a predicted
    /// mention at one of their candidate spans, or else to a gold mention
    /// there (relation and cluster lines carry no mention types); endpoints
    /// that resolve to neither are dropped.
    pub fn to_document(&self, gold: &Document, schema: &SchemaDescriptor) -> Document {
        let mut mentions: Vec<Mention> = Vec::new();
        for (k, m) in self.mentions.iter().enumerate() {
            let Some(mention_type) = schema.mention_type(&m.mention_type) else {
                continue;
            };
            mentions.push(Mention {
                id: format!("p{}", k + 1),
                mention_type: mention_type.to_string(),
                token_indices: m.token_indices.clone(),
            });
        }
        // `taken` holds ids an endpoint may not reuse, so repeated surfaces
        // in one cluster land on distinct occurrences.
        let resolve = |endpoint: &Endpoint, mentions: &mut Vec<Mention>, taken: &BTreeSet<String>| -> Option<String> {
            let at = |m: &Mention, span: &Span| {
                m.token_indices.first() == Some(&span.0) && m.token_indices.last().map(|l| l + 1) == Some(span.1)
            };
            let free = |id: &String| !taken.contains(id);
            for span in &endpoint.candidates {
                if let Some(m) = mentions.iter().find(|m| at(m, span) && free(&m.id)) {
                    return Some(m.id.clone());
                }
            }
            let borrowed = endpoint.candidates.iter().find_map(|span| {
                gold.mentions
                    .iter()
                    .find(|m| at(m, span) && free(&format!("g-{}", m.id)))
            })?;
            let id = format!("g-{}", borrowed.id);
            if !mentions.iter().any(|m| m.id == id) {
                mentions.push(Mention {
                    id: id.clone(),
                    ..borrowed.clone()
                });
            }
            Some(id)
        };
        let none = BTreeSet::new();
        let mut relations = Vec::new();
        for r in &self.relations {
            let Some(relation_type) = schema.relation_type(&r.relation_type).map(str::to_string) else {
                continue;
            };
            if let (Some(s), Some(t)) = (
                resolve(&r.source, &mut mentions, &none),
                resolve(&r.target, &mut mentions, &none),
            ) {
                relations.push(Relation {
                    id: format!("r{}", relations.len() + 1),
                    relation_type,
                    source_mention_id: s,
                    target_mention_id: t,
                });
            }
        }
        let mut entities: Vec<Entity> = Vec::new();
        for c in &self.clusters {
            // A mention belongs to at most one entity.
            let mut taken: BTreeSet<String> = entities.iter().flat_map(|e| e.mention_ids.iter().cloned()).collect();
            let mut fresh = BTreeSet::new();
            for member in &c.members {
                if let Some(id) = resolve(member, &mut mentions, &taken) {
                    taken.insert(id.clone());
                    fresh.insert(id);
                }
            }
            if !fresh.is_empty() {
                entities.push(Entity {
                    id: format!("e{}", entities.len() + 1),
                    mention_ids: fresh,
                });
            }
        }
        Document {
            id: gold.id.clone(),
            raw_text: gold.raw_text.clone(),
            tokens: gold.tokens.clone(),
            mentions,
            entities,
            relations,
            constraints: Vec::new(),
        }
    }
}

/// Everything produced for one document and one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub prompt: RenderedPrompt,
    pub response: ChatResponse,
    pub report: ParseReport,
    pub predictions: Predictions,
}

pub(crate) fn request(prompt: &RenderedPrompt, model: &ModelSettings) -> ChatRequest {
    ChatRequest {
        model_id: model.model_id.clone(),
        temperature: model.temperature,
        prompt_text: prompt.text.clone(),
        max_output_tokens: model.max_output_tokens,
    }
}

/// Assembles the prompt (shots drawn from `shot_pool` minus `doc`), asks the
/// model, parses and grounds the answer.
pub fn extract_document(
    doc: &Document,
    shot_pool: &[Document],
    config: &PromptConfig,
    client: &LlmClient,
    model: &ModelSettings,
) -> Result<Extraction, PipelineError> {
    let prompt = assemble(config, doc, shot_pool)?;
    let response = client.complete(&request(&prompt, model))?;
    let report = parse(&response.text, config.task, &config.schema);
    let predictions = Predictions::from_report(&report, doc);
    Ok(Extraction {
        prompt,
        response,
        report,
        predictions,
    })
}

/// Counts for one document under the schema's policy for `task`.
pub fn score_document(
    task: Task,
    predictions: &Predictions,
    doc: &Document,
    schema: &SchemaDescriptor,
) -> ConfusionCounts {
    let policy = schema.policy(task);
    match task {
        Task::Md => score_md(
            &predictions.mentions,
            &predictions.ungrounded_mentions,
            &doc.mentions,
            doc,
            &policy,
        ),
        Task::Er => score_er(&predictions.clusters, &doc.entity_clusters(schema), doc, &policy),
        Task::Re => score_re(&predictions.relations, &doc.relations, doc, &policy),
        Task::Ce => score_constraints(&predictions.constraints, &doc.constraints, &policy),
    }
}

/// One document's outcome within a run, as written to `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    /// Run cell, e.g. `MD 3-shot` or `RE No Persona`.
    pub cell: String,
    pub task: Task,
    pub document_id: String,
    pub prompt_fingerprint: String,
    pub shot_ids: Vec<String>,
    pub response_text: String,
    pub retrieved_from_cache: bool,
    pub input_token_count: u64,
    pub output_token_count: u64,
    pub report: ParseReport,
    pub predictions: Predictions,
    pub counts: ConfusionCounts,
    #[serde(skip)]
    pub prompt_text: String,
}

/// Maps `f` over `items` on up to `workers` threads, keeping input order.
pub(crate) fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let workers = workers.clamp(1, items.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= items.len() {
                    break;
                }
                let r = f(&items[k]);
                results.lock().unwrap()[k] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every index was processed"))
        .collect()
}

/// Runs one prompt configuration over every document of the dataset, each
/// with leave-one-out shots. Fails with the first failing document's error.
pub(crate) fn run_documents(
    dataset: &Dataset,
    config: &PromptConfig,
    client: &LlmClient,
    model: &ModelSettings,
    cell: &str,
) -> Result<Vec<DocumentRecord>, PipelineError> {
    let targets: Vec<&Document> = dataset.documents.iter().collect();
    run_targets(&targets, dataset, config, client, model, cell)
}

pub(crate) fn run_targets(
    targets: &[&Document],
    dataset: &Dataset,
    config: &PromptConfig,
    client: &LlmClient,
    model: &ModelSettings,
    cell: &str,
) -> Result<Vec<DocumentRecord>, PipelineError> {
    let outcomes = parallel_map(targets, client.max_concurrent(), |doc| {
        let extraction = extract_document(doc, &dataset.documents, config, client, model)?;
        let counts = score_document(config.task, &extraction.predictions, doc, &dataset.schema);
        Ok(DocumentRecord {
            cell: cell.to_string(),
            task: config.task,
            document_id: doc.id.clone(),
            prompt_fingerprint: extraction.prompt.config_fingerprint,
            shot_ids: extraction.prompt.shot_ids,
            response_text: extraction.response.text,
            retrieved_from_cache: extraction.response.retrieved_from_cache,
            input_token_count: extraction.response.input_token_count,
            output_token_count: extraction.response.output_token_count,
            report: extraction.report,
            predictions: extraction.predictions,
            counts,
            prompt_text: extraction.prompt.text,
        })
    });
    outcomes.into_iter().collect()
}

pub(crate) fn ensure_supported(dataset: &Dataset, tasks: &[Task]) -> Result<(), PipelineError> {
    match tasks.iter().find(|t| !dataset.schema.supports(**t)) {
        Some(&task) => Err(PipelineError::UnsupportedTask {
            dataset: dataset.schema.dataset_name.clone(),
            task,
        }),
        None => Ok(()),
    }
}

/// A provider that answers every extraction prompt with the target
/// document's gold annotations in the output format, or with nothing when it
/// does not know the document. When the prompt names its allowed mention
/// types, only those lines are echoed.
#[derive(Debug, Clone)]
pub struct GoldEcho {
    /// Raw text to the rendered gold lines of each supported task.
    answers: BTreeMap<String, Vec<(Task, Vec<String>)>>,
}

const ALLOWED_TYPES_PREFIX: &str = "Allowed types are: ";

impl GoldEcho {
    pub fn new(dataset: &Dataset) -> Self {
        let mut answers: BTreeMap<String, Vec<(Task, Vec<String>)>> = BTreeMap::new();
        for doc in &dataset.documents {
            answers.entry(doc.raw_text.clone()).or_insert_with(|| {
                Task::ALL
                    .into_iter()
                    .filter(|t| dataset.schema.supports(*t))
                    .map(|t| (t, render_gold(doc, t, &dataset.schema)))
                    .collect()
            });
        }
        GoldEcho { answers }
    }

    pub fn respond(&self, prompt: &str) -> String {
        let marker = format!("\n{INPUT_DELIMITER}\n");
        let Some(at) = prompt.rfind(&marker) else {
            return String::new();
        };
        let (head, input) = (&prompt[..at], &prompt[at + marker.len()..]);
        let context = format!("\n\n{AGENT_CONTEXT_DELIMITER}\n");
        let text = input.find(&context).map_or(input, |k| &input[..k]);
        let Some(tasks) = self.answers.get(text) else {
            return String::new();
        };
        // Format lines may contain one another; the longest present wins.
        let Some((task, lines)) = tasks
            .iter()
            .filter(|(task, _)| head.contains(&format!("\n{}\n", format_line(*task))))
            .max_by_key(|(task, _)| format_line(*task).len())
        else {
            return String::new();
        };
        let allowed: Option<Vec<&str>> = head.rfind(ALLOWED_TYPES_PREFIX).map(|k| {
            let rest = &head[k + ALLOWED_TYPES_PREFIX.len()..];
            rest[..rest.find(". ").unwrap_or(rest.len())].split(", ").collect()
        });
        let keep = |line: &&String| match (&allowed, line.split_once('|')) {
            (Some(types), Some((kind, _))) if *task == Task::Md => types.contains(&kind),
            _ => true,
        };
        lines.iter().filter(keep).cloned().collect::<Vec<_>>().join("\n")
    }
}

impl Provider for GoldEcho {
    fn name(&self) -> &str {
        "gold-echo"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let text = self.respond(&request.prompt_text);
        Ok(Completion {
            input_token_count: approximate_tokens(&request.prompt_text),
            output_token_count: approximate_tokens(&text),
            text,
        })
    }
}

pub fn gold_echo_stub(dataset: &Dataset) -> GoldEcho {
    GoldEcho::new(dataset)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::test_support::{doc, mention, pet_schema, relation};
    use crate::corpus::Entity;
    use crate::llm::stub_provider;

    pub fn tiny_pet() -> Dataset {
        let documents = (0..4)
            .map(|k| {
                let mut d = doc(
                    &format!("doc-{k}"),
                    &format!("the clerk {k} registers the claim . then the manager {k} checks it ."),
                );
                d.mentions = vec![
                    mention("m0", "Actor", &[0, 1, 2]),
                    mention("m1", "Activity", &[3]),
                    mention("m2", "Activity Data", &[4, 5]),
                    mention("m3", "Actor", &[8, 9, 10]),
                    mention("m4", "Activity", &[11]),
                    mention("m5", "Activity Data", &[12]),
                ];
                d.entities = vec![Entity {
                    id: "e0".into(),
                    mention_ids: ["m2".to_string(), "m5".to_string()].into(),
                }];
                d.relations = vec![
                    relation("r0", "actor performer", "m1", "m0"),
                    relation("r1", "uses", "m1", "m2"),
                    relation("r2", "flow", "m1", "m4"),
                    relation("r3", "actor performer", "m4", "m3"),
                    relation("r4", "uses", "m4", "m5"),
                ];
                d
            })
            .collect();
        Dataset {
            schema: pet_schema(),
            documents,
        }
        .checked()
        .unwrap()
    }

    #[test]
    fn gold_echo_closes_the_loop() {
        let data = tiny_pet();
        let client = LlmClient::direct(gold_echo_stub(&data));
        let experiment = ExperimentConfig::default();
        for task in [Task::Md, Task::Er, Task::Re] {
            for shots in [0, 1, 3] {
                let config = experiment.prompt_config(task, &data.schema, shots);
                for doc in &data.documents {
                    let x = extract_document(doc, &data.documents, &config, &client, &experiment.model).unwrap();
                    assert_eq!(x.report.error_count, 0);
                    let counts = score_document(task, &x.predictions, doc, &data.schema);
                    assert!(counts.gold > 0);
                    assert_eq!(
                        (counts.correct, counts.predicted),
                        (counts.gold, counts.gold),
                        "{task} {shots}"
                    );
                }
            }
        }
    }

    #[test]
    fn empty_response_gives_empty_predictions() {
        let data = tiny_pet();
        let client = LlmClient::direct(stub_provider(vec![]));
        let experiment = ExperimentConfig::default();
        let config = experiment.prompt_config(Task::Md, &data.schema, 0);
        let x = extract_document(&data.documents[0], &data.documents, &config, &client, &experiment.model).unwrap();
        assert_eq!(x.predictions, Predictions::default());
        assert_eq!(x.report.error_count, 0);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<usize> = (0..50).collect();
        assert_eq!(
            parallel_map(&items, 4, |x| x * 2),
            items.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
        assert!(parallel_map(&[] as &[usize], 4, |x| *x).is_empty());
    }
}
