use serde::{Deserialize, Serialize};

use super::{request, ModelSettings, PipelineError, Predictions};
use crate::corpus::{type_key, Document};
use crate::llm::{ChatResponse, LlmClient};
use crate::parser::{parse, ParseReport};
use crate::prompt::{assemble, assemble_with_context, PromptConfig, RenderedPrompt};
use crate::task::Task;

/// One agent's prompt and answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub mention_type: String,
    pub prompt: RenderedPrompt,
    pub response: ChatResponse,
    pub report: ParseReport,
    pub predictions: Predictions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRun {
    pub steps: Vec<AgentStep>,
    /// Union of every agent's grounded mentions.
    pub predictions: Predictions,
}

/// Mention detection split into one prompt per type, run in `types` order.
/// Each agent only sees its own type in the schema and the shots, and its
/// input section lists the grounded mentions of the agents before it.
pub fn run_agents(
    doc: &Document,
    shot_pool: &[Document],
    types: &[String],
    config: &PromptConfig,
    client: &LlmClient,
    model: &ModelSettings,
) -> Result<AgentRun, PipelineError> {
    if types.is_empty() {
        return Err(PipelineError::UnknownType(String::new()));
    }
    let schemas = types
        .iter()
        .map(|t| {
            config
                .schema
                .restricted_to_mention_type(t)
                .ok_or_else(|| PipelineError::UnknownType(t.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut steps = Vec::new();
    let mut predictions = Predictions::default();
    let mut context: Vec<String> = Vec::new();
    for schema in schemas {
        let name = schema.mention_types[0].name.clone();
        let key = type_key(&name);
        let pool: Vec<Document> = shot_pool
            .iter()
            .map(|d| {
                let mut d = d.clone();
                d.mentions.retain(|m| type_key(&m.mention_type) == key);
                d
            })
            .collect();
        let mut agent_config = config.clone();
        agent_config.task = Task::Md;
        agent_config.schema = schema;
        let prompt = if context.is_empty() {
            assemble(&agent_config, doc, &pool)?
        } else {
            assemble_with_context(&agent_config, doc, &pool, &context)?
        };
        let response = client.complete(&request(&prompt, model))?;
        let report = parse(&response.text, Task::Md, &agent_config.schema);
        let found = Predictions::from_report(&report, doc);
        context.extend(
            found
                .mentions
                .iter()
                .map(|m| format!("{}|{}", m.mention_type.to_lowercase(), m.matched_surface)),
        );
        predictions.extend(found.clone());
        steps.push(AgentStep {
            mention_type: name,
            prompt,
            response,
            report,
            predictions: found,
        });
    }
    Ok(AgentRun { steps, predictions })
}
