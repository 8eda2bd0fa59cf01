//! Importer for the PET export layout: one JSON document per line carrying
//! tokens, per-token sentence ids, BIO tags, head-addressed relation records
//! and (in the extended release) entity clusters.
//!
//! ```text
//! {"document name": "doc-1.1",
//!  "tokens": [...], "tokens-IDs": [...], "ner_tags": [...], "sentence-IDs": [...],
//!  "relations": {"source-head-sentence-ID": [...], "source-head-word-ID": [...],
//!                "relation-type": [...],
//!                "target-head-sentence-ID": [...], "target-head-word-ID": [...]},
//!  "entities": [[{"sentence-ID": 0, "word-ID": 1}, ...], ...]}
//! ```
//!
//! Relation endpoints and entity members address a mention by its first token.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{decode_bio, CorpusError, Dataset, Document, Entity, Mention, Relation, SchemaDescriptor, Token};

const PET_SCHEMA: &str = include_str!("../../../../data/schemas/pet.json");

#[derive(Debug, Deserialize)]
struct PetLine {
    #[serde(rename = "document name")]
    document_name: String,
    tokens: Vec<String>,
    #[serde(rename = "tokens-IDs")]
    token_ids: Vec<usize>,
    ner_tags: Vec<String>,
    #[serde(rename = "sentence-IDs")]
    sentence_ids: Vec<usize>,
    #[serde(default)]
    relations: PetRelations,
    #[serde(default)]
    entities: Vec<Vec<PetHead>>,
}

#[derive(Debug, Default, Deserialize)]
struct PetRelations {
    #[serde(rename = "source-head-sentence-ID", default)]
    source_sentence: Vec<usize>,
    #[serde(rename = "source-head-word-ID", default)]
    source_word: Vec<usize>,
    #[serde(rename = "relation-type", default)]
    relation_type: Vec<String>,
    #[serde(rename = "target-head-sentence-ID", default)]
    target_sentence: Vec<usize>,
    #[serde(rename = "target-head-word-ID", default)]
    target_word: Vec<usize>,
}

#[derive(Debug, Deserialize)]
struct PetHead {
    #[serde(rename = "sentence-ID")]
    sentence: usize,
    #[serde(rename = "word-ID")]
    word: usize,
}

/// The shipped PET schema (7 mention types, 6 relation types).
pub fn pet_schema() -> SchemaDescriptor {
    serde_json::from_str(PET_SCHEMA).expect("bundled PET schema is valid JSON")
}

pub fn load_pet(path: &Path) -> Result<Dataset, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pet(&text, pet_schema())
}

/// Parses PET export text against a schema; every document is validated.
pub fn parse_pet(text: &str, schema: SchemaDescriptor) -> Result<Dataset, CorpusError> {
    let mut documents = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = k + 1;
        let record: PetLine = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        documents.push(convert(record, &schema, line_no)?);
    }
    Dataset { schema, documents }.checked()
}

fn convert(record: PetLine, schema: &SchemaDescriptor, line: usize) -> Result<Document, CorpusError> {
    let malformed = |message: String| CorpusError::Malformed { line, message };
    let n = record.tokens.len();
    if record.token_ids.len() != n || record.ner_tags.len() != n || record.sentence_ids.len() != n {
        return Err(malformed(format!(
            "`{}`: tokens, tokens-IDs, ner_tags and sentence-IDs differ in length",
            record.document_name
        )));
    }

    let tokens: Vec<Token> = record
        .tokens
        .iter()
        .zip(&record.sentence_ids)
        .enumerate()
        .map(|(index, (text, &sentence_index))| Token {
            text: text.clone(),
            index,
            sentence_index,
        })
        .collect();
    let position: BTreeMap<(usize, usize), usize> = record
        .sentence_ids
        .iter()
        .zip(&record.token_ids)
        .enumerate()
        .map(|(k, (&s, &w))| ((s, w), k))
        .collect();

    let spans = decode_bio(&record.ner_tags).map_err(|e| malformed(format!("`{}`: {e}", record.document_name)))?;
    let mut mentions = Vec::with_capacity(spans.len());
    let mut mention_at_token = BTreeMap::new();
    for (k, span) in spans.into_iter().enumerate() {
        let id = format!("m{k}");
        mention_at_token.insert(span.start, id.clone());
        let mention_type = schema
            .mention_type(&span.mention_type)
            .map(str::to_string)
            .unwrap_or(span.mention_type);
        mentions.push(Mention {
            id,
            mention_type,
            token_indices: (span.start..span.end).collect(),
        });
    }

    // Unresolvable heads keep a placeholder id so validation names the document.
    let resolve = |sentence: usize, word: usize| -> String {
        position
            .get(&(sentence, word))
            .and_then(|k| mention_at_token.get(k))
            .cloned()
            .unwrap_or_else(|| format!("missing@{sentence}:{word}"))
    };

    let r = &record.relations;
    let count = r.relation_type.len();
    if [
        r.source_sentence.len(),
        r.source_word.len(),
        r.target_sentence.len(),
        r.target_word.len(),
    ]
    .iter()
    .any(|&l| l != count)
    {
        return Err(malformed(format!(
            "`{}`: relation columns differ in length",
            record.document_name
        )));
    }
    let relations = (0..count)
        .map(|k| Relation {
            id: format!("r{k}"),
            relation_type: schema
                .relation_type(&r.relation_type[k])
                .map(str::to_string)
                .unwrap_or_else(|| r.relation_type[k].clone()),
            source_mention_id: resolve(r.source_sentence[k], r.source_word[k]),
            target_mention_id: resolve(r.target_sentence[k], r.target_word[k]),
        })
        .collect();

    let entities = record
        .entities
        .iter()
        .enumerate()
        .map(|(k, heads)| Entity {
            id: format!("e{k}"),
            mention_ids: heads.iter().map(|h| resolve(h.sentence, h.word)).collect(),
        })
        .collect();

    Ok(Document {
        id: record.document_name,
        raw_text: record.tokens.join(" "),
        tokens,
        mentions,
        entities,
        relations,
        constraints: Vec::new(),
    })
}
