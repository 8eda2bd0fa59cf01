//! Error-accounting parser for the pipe-delimited output grammar, and
//! grounding of extracted surface strings back onto document tokens.
//!
//! Grammar per task (fields separated by `|`):
//!
//! | task | fields |
//! |------|--------|
//! | MD   | `type|surface` |
//! | ER   | `entity|surface|surface|...` |
//! | RE   | `type|source surface|target surface` |
//! | CE   | `type|not-or-empty|action` or `type|not-or-empty|action|action` |

mod ground;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{type_key, SchemaDescriptor};
use crate::task::Task;

pub use ground::{
    candidate_spans, ground, ground_clusters, ground_relations, ground_report, normalize_surface, Endpoint,
    GroundedCluster, GroundedMention, GroundedRelation, Span,
};

/// Leading keyword of every entity-resolution line.
pub const ENTITY_KEYWORD: &str = "entity";
/// Literal marking a negated constraint.
pub const NEGATION_FLAG: &str = "not";

/// Schematic line shown to the model for each task.
pub fn format_line(task: Task) -> &'static str {
    match task {
        Task::Md => "mention type|mention text",
        Task::Er => "entity|mention text 1|mention text 2|...",
        Task::Re => "relation type|source mention text|target mention text",
        Task::Ce => "constraint type|not (or empty)|first action|second action (omitted for unary types)",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedMention {
    pub mention_type: String,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedCluster {
    pub surfaces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRelation {
    pub relation_type: String,
    pub source_surface: String,
    pub target_surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedConstraint {
    pub constraint_type: String,
    pub negated: bool,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParsedItem {
    Mention(ParsedMention),
    Cluster(ParsedCluster),
    Relation(ParsedRelation),
    Constraint(ParsedConstraint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorReason {
    BadFieldCount,
    UnknownType,
    EmptyField,
    BadNegationFlag,
}

impl fmt::Display for ParseErrorReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorReason::BadFieldCount => "bad field count",
            ParseErrorReason::UnknownType => "unknown type",
            ParseErrorReason::EmptyField => "empty field",
            ParseErrorReason::BadNegationFlag => "bad negation flag",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorLine {
    /// 1-based.
    pub line_number: usize,
    pub raw: String,
    pub reason: ParseErrorReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub items: Vec<ParsedItem>,
    pub error_count: usize,
    pub error_lines: Vec<ErrorLine>,
    pub ignored_line_count: usize,
}

impl ParseReport {
    pub fn mentions(&self) -> impl Iterator<Item = &ParsedMention> {
        self.items.iter().filter_map(|i| match i {
            ParsedItem::Mention(m) => Some(m),
            _ => None,
        })
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ParsedCluster> {
        self.items.iter().filter_map(|i| match i {
            ParsedItem::Cluster(c) => Some(c),
            _ => None,
        })
    }

    pub fn relations(&self) -> impl Iterator<Item = &ParsedRelation> {
        self.items.iter().filter_map(|i| match i {
            ParsedItem::Relation(r) => Some(r),
            _ => None,
        })
    }

    pub fn constraints(&self) -> impl Iterator<Item = &ParsedConstraint> {
        self.items.iter().filter_map(|i| match i {
            ParsedItem::Constraint(c) => Some(c),
            _ => None,
        })
    }
}

/// Headers that open a prose section the prompt itself asks for.
const PROSE_HEADERS: &[&str] = &[
    "facts",
    "fact list",
    "list of facts",
    "fact check list",
    "reflection",
    "reflections",
];

fn is_prose_header(line: &str) -> bool {
    let head = line
        .trim()
        .trim_matches(|c: char| matches!(c, '#' | '*' | '_' | ':') || c.is_whitespace())
        .to_lowercase();
    PROSE_HEADERS.contains(&head.as_str())
}

fn task_type_keys(task: Task, schema: &SchemaDescriptor) -> Vec<String> {
    match task {
        Task::Md => schema.mention_types.iter().map(|t| type_key(&t.name)).collect(),
        Task::Er => vec![ENTITY_KEYWORD.to_string()],
        Task::Re => schema.relation_types.iter().map(|t| type_key(&t.name)).collect(),
        Task::Ce => schema.constraint_types.iter().map(|t| type_key(&t.name)).collect(),
    }
}

/// A line that is meant as a record: it uses the delimiter, or it opens with
/// a known type name followed by some separator.
fn is_record_like(line: &str, type_keys: &[String]) -> bool {
    if line.contains('|') {
        return true;
    }
    let body = line
        .trim_start()
        .trim_start_matches(['-', '*', '•', ' '])
        .to_lowercase()
        .replace('_', " ");
    type_keys.iter().any(|key| {
        body.strip_prefix(key.as_str()).is_some_and(|rest| {
            let rest = rest.trim_start();
            rest.starts_with([':', '-', '–', ',', '(', '=', ';', '>', '\t'])
        })
    })
}

fn parse_fields(fields: &[&str], task: Task, schema: &SchemaDescriptor) -> Result<ParsedItem, ParseErrorReason> {
    use ParseErrorReason::*;
    let non_empty = |fs: &[&str]| {
        if fs.iter().any(|f| f.is_empty()) {
            Err(EmptyField)
        } else {
            Ok(())
        }
    };
    match task {
        Task::Md => {
            if fields.len() != 2 {
                return Err(BadFieldCount);
            }
            non_empty(fields)?;
            let ty = schema.mention_type(fields[0]).ok_or(UnknownType)?;
            Ok(ParsedItem::Mention(ParsedMention {
                mention_type: ty.to_string(),
                surface: fields[1].to_string(),
            }))
        }
        Task::Er => {
            if fields.len() < 2 {
                return Err(BadFieldCount);
            }
            non_empty(fields)?;
            if type_key(fields[0]) != ENTITY_KEYWORD {
                return Err(UnknownType);
            }
            Ok(ParsedItem::Cluster(ParsedCluster {
                surfaces: fields[1..].iter().map(|s| s.to_string()).collect(),
            }))
        }
        Task::Re => {
            if fields.len() != 3 {
                return Err(BadFieldCount);
            }
            non_empty(fields)?;
            let ty = schema.relation_type(fields[0]).ok_or(UnknownType)?;
            Ok(ParsedItem::Relation(ParsedRelation {
                relation_type: ty.to_string(),
                source_surface: fields[1].to_string(),
                target_surface: fields[2].to_string(),
            }))
        }
        Task::Ce => {
            if !(3..=4).contains(&fields.len()) {
                return Err(BadFieldCount);
            }
            if fields[0].is_empty() {
                return Err(EmptyField);
            }
            let spec = schema.constraint_type(fields[0]).ok_or(UnknownType)?;
            let expected = if spec.unary { 3 } else { 4 };
            if fields.len() != expected {
                return Err(BadFieldCount);
            }
            non_empty(&fields[2..])?;
            let negated = match fields[1].to_lowercase().as_str() {
                "" => false,
                NEGATION_FLAG => true,
                _ => return Err(BadNegationFlag),
            };
            Ok(ParsedItem::Constraint(ParsedConstraint {
                constraint_type: spec.name.clone(),
                negated,
                actions: fields[2..].iter().map(|s| s.to_string()).collect(),
            }))
        }
    }
}

/// Parses a raw model response. Never fails: every line is an item, an
/// error, or ignored prose, so `items + errors + ignored == lines`.
pub fn parse(raw: &str, task: Task, schema: &SchemaDescriptor) -> ParseReport {
    let keys = task_type_keys(task, schema);
    let mut report = ParseReport::default();
    let mut output_started = false;
    let mut in_prose_section = false;

    for (k, line) in raw.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("```") {
            report.ignored_line_count += 1;
            continue;
        }
        if is_prose_header(trimmed) {
            in_prose_section = true;
            report.ignored_line_count += 1;
            continue;
        }
        let record_like = is_record_like(trimmed, &keys);
        if !record_like && (in_prose_section || !output_started) {
            report.ignored_line_count += 1;
            continue;
        }
        if record_like {
            in_prose_section = false;
            output_started = true;
        }
        let fields: Vec<&str> = trimmed.split('|').map(str::trim).collect();
        match parse_fields(&fields, task, schema) {
            Ok(item) => report.items.push(item),
            Err(reason) => report.error_lines.push(ErrorLine {
                line_number: k + 1,
                raw: line.to_string(),
                reason,
            }),
        }
    }
    report.error_count = report.error_lines.len();
    report
}
