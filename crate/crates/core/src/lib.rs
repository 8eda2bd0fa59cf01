//! Extraction of business-process information from natural-language process
//! descriptions with modular LLM prompts, scoring against annotated corpora,
//! and compilation of the results into BPMN 2.0 models.

pub mod bpmn;
pub mod corpus;
pub mod eval;
pub mod llm;
pub mod parser;
pub mod pipeline;
pub mod prompt;
pub mod task;

pub use task::Task;
