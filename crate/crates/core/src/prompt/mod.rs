//! Deterministic assembly of the modular extraction prompt.
//!
//! A prompt consists of three blocks of individually toggleable components,
//! rendered in a fixed order and followed by the target text:
//!
//! * A, context: persona, context manager
//! * B, task description: meta language, chain of thought, fact list, reflection
//! * C, restrictions: additional considerations, disambiguation hints, output
//!   format, format example, few-shot examples
//!
//! Every component's text comes from a [`PromptTemplate`] and the dataset's
//! [`SchemaDescriptor`]. Each component span includes its trailing blank-line
//! separator, so removing a component removes exactly its span.

mod ablation;
mod gold;
mod shots;
mod template;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Document, SchemaDescriptor};
use crate::parser::format_line;
use crate::task::Task;

pub use ablation::{ablation_variants, ABLATION_LABELS, BASELINE_LABEL};
pub use gold::render_gold;
pub use shots::{select_shots, shot_seed_for, FewShotExample};
pub use template::{PromptTemplate, PLACEHOLDERS};

/// Delimiter line that introduces the target text.
pub const INPUT_DELIMITER: &str = "Input:";
/// Delimiter line that introduces outputs passed in from earlier agents.
pub const AGENT_CONTEXT_DELIMITER: &str = "Already extracted:";

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("requested {requested} shots but only {available} documents are available")]
    ShotsExceedPool { requested: usize, available: usize },
    #[error("invalid prompt config: {0}")]
    InvalidConfig(String),
    #[error("prompt template (line {line}): {message}")]
    Template { line: usize, message: String },
    #[error("prompt template has no section for {0}")]
    MissingSection(PromptComponentKind),
    #[error("ablation needs a base config with every component enabled and full brevity")]
    NotFullBase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptComponentKind {
    Persona,
    ContextManager,
    MetaLanguage,
    ChainOfThought,
    FactList,
    Reflection,
    AdditionalConsiderations,
    Disambiguation,
    FormatSpec,
    FormatExample,
    FewShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Context,
    TaskDescription,
    Restrictions,
}

impl PromptComponentKind {
    /// Rendering order.
    pub const ALL: [PromptComponentKind; 11] = [
        PromptComponentKind::Persona,
        PromptComponentKind::ContextManager,
        PromptComponentKind::MetaLanguage,
        PromptComponentKind::ChainOfThought,
        PromptComponentKind::FactList,
        PromptComponentKind::Reflection,
        PromptComponentKind::AdditionalConsiderations,
        PromptComponentKind::Disambiguation,
        PromptComponentKind::FormatSpec,
        PromptComponentKind::FormatExample,
        PromptComponentKind::FewShot,
    ];

    pub fn section_name(self) -> &'static str {
        match self {
            PromptComponentKind::Persona => "persona",
            PromptComponentKind::ContextManager => "context_manager",
            PromptComponentKind::MetaLanguage => "meta_language",
            PromptComponentKind::ChainOfThought => "chain_of_thought",
            PromptComponentKind::FactList => "fact_list",
            PromptComponentKind::Reflection => "reflection",
            PromptComponentKind::AdditionalConsiderations => "additional_considerations",
            PromptComponentKind::Disambiguation => "disambiguation",
            PromptComponentKind::FormatSpec => "format_spec",
            PromptComponentKind::FormatExample => "format_example",
            PromptComponentKind::FewShot => "few_shot",
        }
    }

    pub fn block(self) -> Block {
        use PromptComponentKind::*;
        match self {
            Persona | ContextManager => Block::Context,
            MetaLanguage | ChainOfThought | FactList | Reflection => Block::TaskDescription,
            AdditionalConsiderations | Disambiguation | FormatSpec | FormatExample | FewShot => Block::Restrictions,
        }
    }
}

impl fmt::Display for PromptComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.section_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Brevity {
    #[default]
    Full,
    /// Definitions and hints cut to their first sentence.
    VeryShort,
}

/// How few-shot examples are drawn for each target document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotStrategy {
    /// A fresh seeded sample per target document.
    #[default]
    PerDocument,
    /// One seeded sample for the whole run; the target is skipped if drawn.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub task: Task,
    pub schema: SchemaDescriptor,
    pub template: PromptTemplate,
    pub enabled: BTreeSet<PromptComponentKind>,
    pub shot_count: usize,
    pub shot_seed: u64,
    pub brevity: Brevity,
    #[serde(default)]
    pub shot_strategy: ShotStrategy,
}

impl PromptConfig {
    /// Every component enabled, zero-shot, full brevity.
    pub fn full(task: Task, schema: SchemaDescriptor, template: PromptTemplate) -> Self {
        PromptConfig {
            task,
            schema,
            template,
            enabled: PromptComponentKind::ALL.into_iter().collect(),
            shot_count: 0,
            shot_seed: 0,
            brevity: Brevity::Full,
            shot_strategy: ShotStrategy::PerDocument,
        }
    }

    pub fn with_shots(mut self, shot_count: usize, shot_seed: u64) -> Self {
        self.shot_count = shot_count;
        self.shot_seed = shot_seed;
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if !self.enabled.contains(&PromptComponentKind::FormatSpec) {
            return Err(PromptError::InvalidConfig(
                "the format specification cannot be disabled".into(),
            ));
        }
        if self.shot_count > 0 && !self.enabled.contains(&PromptComponentKind::FewShot) {
            return Err(PromptError::InvalidConfig(format!(
                "shot_count is {} but few-shot examples are disabled",
                self.shot_count
            )));
        }
        Ok(())
    }

    /// Digest of everything that influences rendering, independent of target.
    pub fn digest(&self) -> String {
        let enabled: Vec<&str> = self.enabled.iter().map(|k| k.section_name()).collect();
        let payload = serde_json::json!({
            "task": self.task,
            "schema": self.schema,
            "template": self.template.digest(),
            "enabled": enabled,
            "shot_count": self.shot_count,
            "shot_seed": self.shot_seed,
            "brevity": self.brevity,
            "shot_strategy": self.shot_strategy,
        });
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    /// Byte offset and length of each rendered component.
    pub component_spans: BTreeMap<PromptComponentKind, (usize, usize)>,
    pub config_fingerprint: String,
    pub target_id: String,
    pub shot_ids: Vec<String>,
}

/// Content hash binding a config to one target and its shots.
pub fn fingerprint(config: &PromptConfig, target_id: &str, shot_ids: &[String], agent_context: Option<&str>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config.digest().as_bytes());
    hasher.update([0]);
    hasher.update(target_id.as_bytes());
    for id in shot_ids {
        hasher.update([0]);
        hasher.update(id.as_bytes());
    }
    if let Some(context) = agent_context {
        hasher.update([1]);
        hasher.update(context.as_bytes());
    }
    hex::encode(hasher.finalize())
}

fn first_sentence(text: &str) -> &str {
    let text = text.trim();
    match text.find(". ") {
        Some(pos) => &text[..=pos],
        None => text,
    }
}

struct TypeDoc<'a> {
    name: &'a str,
    note: Option<&'static str>,
    definition: &'a str,
    hints: &'a [String],
}

fn inventory<'a>(config: &'a PromptConfig) -> Vec<(Option<&'static str>, Vec<TypeDoc<'a>>)> {
    let schema = &config.schema;
    let mention_docs = |only_entities: bool| {
        schema
            .mention_types
            .iter()
            .filter(|t| !only_entities || schema.is_entity_type(&t.name))
            .map(|t| TypeDoc {
                name: &t.name,
                note: None,
                definition: &t.definition,
                hints: &t.hints,
            })
            .collect::<Vec<_>>()
    };
    match config.task {
        Task::Md => vec![(None, mention_docs(false))],
        Task::Er => vec![(None, mention_docs(true))],
        Task::Re => vec![
            (Some("Mention types:"), mention_docs(false)),
            (
                Some("Relation types:"),
                schema
                    .relation_types
                    .iter()
                    .map(|t| TypeDoc {
                        name: &t.name,
                        note: None,
                        definition: &t.definition,
                        hints: &t.hints,
                    })
                    .collect(),
            ),
        ],
        Task::Ce => vec![(
            None,
            schema
                .constraint_types
                .iter()
                .map(|t| TypeDoc {
                    name: &t.name,
                    note: Some(if t.unary { "unary" } else { "binary" }),
                    definition: &t.definition,
                    hints: &t.hints,
                })
                .collect(),
        )],
    }
}

fn output_type_names(config: &PromptConfig) -> String {
    let schema = &config.schema;
    let names: Vec<String> = match config.task {
        Task::Md => schema.mention_types.iter().map(|t| t.name.to_lowercase()).collect(),
        Task::Er => vec![crate::parser::ENTITY_KEYWORD.to_string()],
        Task::Re => schema.relation_types.iter().map(|t| t.name.to_lowercase()).collect(),
        Task::Ce => schema.constraint_types.iter().map(|t| t.name.to_lowercase()).collect(),
    };
    names.join(", ")
}

fn placeholder_values(config: &PromptConfig, shots: &[FewShotExample]) -> BTreeMap<&'static str, String> {
    let shorten = |text: &str| match config.brevity {
        Brevity::Full => text.trim().to_string(),
        Brevity::VeryShort => first_sentence(text).to_string(),
    };
    let groups = inventory(config);

    let mut definitions = Vec::new();
    let mut hints = Vec::new();
    for (heading, docs) in &groups {
        if let Some(h) = heading {
            definitions.push(h.to_string());
        }
        for doc in docs {
            let name = match doc.note {
                Some(note) => format!("{} ({note})", doc.name),
                None => doc.name.to_string(),
            };
            definitions.push(format!("- {name}: {}", shorten(doc.definition)));
            for hint in doc.hints {
                hints.push(format!("- {}: {}", doc.name, shorten(hint)));
            }
        }
    }

    let examples: Vec<String> = shots
        .iter()
        .enumerate()
        .map(|(k, shot)| {
            format!(
                "Example {}:\nText:\n{}\nOutput:\n{}",
                k + 1,
                shot.input_text,
                shot.expected_output_lines.join("\n")
            )
        })
        .collect();

    let mut values = BTreeMap::new();
    values.insert("dataset", config.schema.dataset_name.clone());
    values.insert("task_name", config.task.long_name().to_string());
    values.insert("task_code", config.task.code().to_string());
    values.insert("type_names", output_type_names(config));
    values.insert("type_definitions", definitions.join("\n"));
    values.insert("disambiguation_hints", hints.join("\n"));
    values.insert("format_line", format_line(config.task).to_string());
    values.insert("shot_examples", examples.join("\n\n"));
    values
}

/// Renders the prompt for `target`, drawing few-shot examples from
/// `shot_pool` (the target itself is never drawn).
pub fn assemble(
    config: &PromptConfig,
    target: &Document,
    shot_pool: &[Document],
) -> Result<RenderedPrompt, PromptError> {
    render(config, target, shot_pool, None)
}

/// Like [`assemble`], with earlier agents' output lines included in the
/// input section.
pub fn assemble_with_context(
    config: &PromptConfig,
    target: &Document,
    shot_pool: &[Document],
    agent_lines: &[String],
) -> Result<RenderedPrompt, PromptError> {
    let context = agent_lines.join("\n");
    render(config, target, shot_pool, Some(&context))
}

fn render(
    config: &PromptConfig,
    target: &Document,
    shot_pool: &[Document],
    agent_context: Option<&str>,
) -> Result<RenderedPrompt, PromptError> {
    config.validate()?;
    let shots = shots::shots_for(config, target, shot_pool)?;
    let values = placeholder_values(config, &shots);

    let mut text = String::new();
    let mut component_spans = BTreeMap::new();
    for kind in PromptComponentKind::ALL {
        if !config.enabled.contains(&kind) {
            continue;
        }
        if kind == PromptComponentKind::FewShot && shots.is_empty() {
            continue;
        }
        let body = config
            .template
            .section(kind, config.task)
            .ok_or(PromptError::MissingSection(kind))?;
        let rendered = template::fill(body, &values);
        let start = text.len();
        text.push_str(rendered.trim_end());
        text.push_str("\n\n");
        component_spans.insert(kind, (start, text.len() - start));
    }
    text.push_str(INPUT_DELIMITER);
    text.push('\n');
    text.push_str(&target.raw_text);
    if let Some(context) = agent_context {
        text.push_str("\n\n");
        text.push_str(AGENT_CONTEXT_DELIMITER);
        text.push('\n');
        text.push_str(context);
    }

    let shot_ids: Vec<String> = shots.iter().map(|s| s.source_document_id.clone()).collect();
    Ok(RenderedPrompt {
        config_fingerprint: fingerprint(config, &target.id, &shot_ids, agent_context),
        text,
        component_spans,
        target_id: target.id.clone(),
        shot_ids,
    })
}
