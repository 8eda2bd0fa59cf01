//! Canonical data model for process-annotated documents, plus loaders for
//! PET-style exports and the canonical JSON-lines interchange format.

mod bio;
mod canonical;
mod pet;
mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use bio::{decode_bio, encode_bio, BioError, BioSpan};
pub use canonical::{load_canonical, load_constraint_dataset, load_dataset, save_canonical, FORMAT_VERSION};
pub use pet::{load_pet, parse_pet, pet_schema};
pub use schema::{type_key, BpmnRoles, ConstraintTypeSpec, SchemaDescriptor, TypeSpec};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("document `{doc_id}` is invalid: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid { doc_id: String, violations: Vec<Violation> },
    #[error("schema `{dataset}` is invalid: {}", .problems.join("; "))]
    InvalidSchema { dataset: String, problems: Vec<String> },
    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Document-level, 0-based.
    pub index: usize,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub mention_type: String,
    pub token_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub mention_ids: BTreeSet<String>,
}

/// A directed, typed link between two mentions of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    pub relation_type: String,
    pub source_mention_id: String,
    pub target_mention_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    pub constraint_type: String,
    pub negated: bool,
    pub first_action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_action: Option<String>,
}

impl Constraint {
    pub fn actions(&self) -> Vec<&str> {
        std::iter::once(self.first_action.as_str())
            .chain(self.second_action.as_deref())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(rename = "text")]
    pub raw_text: String,
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub mentions: Vec<Mention>,
    #[serde(default)]
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
}

impl Document {
    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.id == id)
    }

    pub fn mention_index(&self) -> BTreeMap<&str, &Mention> {
        self.mentions.iter().map(|m| (m.id.as_str(), m)).collect()
    }

    /// Tokens of a span joined by single spaces.
    pub fn span_text(&self, indices: &[usize]) -> String {
        indices
            .iter()
            .filter_map(|&i| self.tokens.get(i))
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn surface(&self, mention: &Mention) -> String {
        self.span_text(&mention.token_indices)
    }

    /// Gold entity clusters with every entity-typed mention outside a cluster
    /// added as an implicit singleton, ordered by first mention position.
    pub fn entity_clusters(&self, schema: &SchemaDescriptor) -> Vec<Vec<&Mention>> {
        let index = self.mention_index();
        let mut clustered = BTreeSet::new();
        let mut clusters: Vec<Vec<&Mention>> = Vec::new();
        for entity in &self.entities {
            let mut members: Vec<&Mention> = entity
                .mention_ids
                .iter()
                .filter_map(|id| index.get(id.as_str()).copied())
                .collect();
            if members.is_empty() {
                continue;
            }
            members.sort_by_key(|m| (m.token_indices.first().copied(), m.id.clone()));
            clustered.extend(members.iter().map(|m| m.id.as_str()));
            clusters.push(members);
        }
        for mention in &self.mentions {
            if schema.is_entity_type(&mention.mention_type) && !clustered.contains(mention.id.as_str()) {
                clusters.push(vec![mention]);
            }
        }
        clusters.sort_by_key(|c| (c[0].token_indices.first().copied(), c[0].id.clone()));
        clusters
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: SchemaDescriptor,
    pub documents: Vec<Document>,
}

impl Dataset {
    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Rejects duplicate document ids and any document that fails [`validate`].
    pub fn checked(self) -> Result<Self, CorpusError> {
        let mut ids = BTreeSet::new();
        for doc in &self.documents {
            if !ids.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateDocument(doc.id.clone()));
            }
            let violations = validate(doc, &self.schema);
            if !violations.is_empty() {
                return Err(CorpusError::Invalid {
                    doc_id: doc.id.clone(),
                    violations,
                });
            }
        }
        Ok(self)
    }
}

/// One broken invariant, naming the offending record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub record_id: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.record_id, self.message)
    }
}

/// Lower-cased with internal whitespace collapsed.
pub fn normalize_action(phrase: &str) -> String {
    phrase.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Checks every record invariant of a document against its dataset schema.
/// An empty result means the document is well-formed.
pub fn validate(doc: &Document, schema: &SchemaDescriptor) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |record_id: &str, message: String| {
        out.push(Violation {
            record_id: record_id.to_string(),
            message,
        })
    };

    for (k, token) in doc.tokens.iter().enumerate() {
        let id = format!("token {k}");
        if token.text.is_empty() {
            push(&id, "empty token text".into());
        }
        if token.index != k {
            push(&id, format!("token index {} out of sequence", token.index));
        }
    }

    let mut mention_ids = BTreeSet::new();
    let mut typed_spans = BTreeSet::new();
    for mention in &doc.mentions {
        if !mention_ids.insert(mention.id.as_str()) {
            push(&mention.id, "duplicate mention id".into());
        }
        if mention.token_indices.is_empty() {
            push(&mention.id, "mention covers no tokens".into());
        }
        if mention.token_indices.windows(2).any(|w| w[0] >= w[1]) {
            push(&mention.id, "token indices are not strictly increasing".into());
        }
        if let Some(&bad) = mention.token_indices.iter().find(|&&i| i >= doc.tokens.len()) {
            push(&mention.id, format!("token index {bad} is out of bounds"));
        }
        if schema.mention_type(&mention.mention_type) != Some(mention.mention_type.as_str()) {
            push(&mention.id, format!("unknown mention type `{}`", mention.mention_type));
        }
        if !typed_spans.insert((mention.mention_type.as_str(), mention.token_indices.clone())) {
            push(&mention.id, "another mention has the same type and span".into());
        }
    }

    let mut entity_ids = BTreeSet::new();
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for entity in &doc.entities {
        if !entity_ids.insert(entity.id.as_str()) {
            push(&entity.id, "duplicate entity id".into());
        }
        if entity.mention_ids.is_empty() {
            push(&entity.id, "entity has no mentions".into());
        }
        for mid in &entity.mention_ids {
            if !mention_ids.contains(mid.as_str()) {
                push(&entity.id, format!("unknown mention id `{mid}`"));
            }
            if let Some(other) = owner.insert(mid.as_str(), entity.id.as_str()) {
                push(
                    &entity.id,
                    format!("mention `{mid}` already belongs to entity `{other}`"),
                );
            }
        }
    }

    let mut relation_ids = BTreeSet::new();
    for relation in &doc.relations {
        if !relation_ids.insert(relation.id.as_str()) {
            push(&relation.id, "duplicate relation id".into());
        }
        for endpoint in [&relation.source_mention_id, &relation.target_mention_id] {
            if !mention_ids.contains(endpoint.as_str()) {
                push(&relation.id, format!("unknown mention id `{endpoint}`"));
            }
        }
        if schema.relation_type(&relation.relation_type) != Some(relation.relation_type.as_str()) {
            push(
                &relation.id,
                format!("unknown relation type `{}`", relation.relation_type),
            );
        }
    }

    let mut constraint_ids = BTreeSet::new();
    for constraint in &doc.constraints {
        if !constraint_ids.insert(constraint.id.as_str()) {
            push(&constraint.id, "duplicate constraint id".into());
        }
        match schema.constraint_type(&constraint.constraint_type) {
            None => push(
                &constraint.id,
                format!("unknown constraint type `{}`", constraint.constraint_type),
            ),
            Some(spec) => {
                if spec.unary && constraint.second_action.is_some() {
                    push(&constraint.id, format!("unary `{}` has a second action", spec.name));
                }
                if !spec.unary && constraint.second_action.is_none() {
                    push(&constraint.id, format!("binary `{}` lacks a second action", spec.name));
                }
            }
        }
        for action in constraint.actions() {
            if action.trim().is_empty() {
                push(&constraint.id, "empty action phrase".into());
            } else if normalize_action(action) != action {
                push(&constraint.id, format!("action `{action}` is not normalized"));
            }
        }
    }
    out
}
