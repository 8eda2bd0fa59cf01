//! Canonical interchange format: JSON lines, one document per line, each
//! carrying `format_version: 1`. A dataset file starts with a header line
//! `{"format_version": 1, "schema": {...}}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Dataset, Document, SchemaDescriptor};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    schema: SchemaDescriptor,
}

#[derive(Serialize)]
struct DocumentLineOut<'a> {
    format_version: u32,
    #[serde(flatten)]
    document: &'a Document,
}

#[derive(Deserialize)]
struct DocumentLineIn {
    format_version: u32,
    #[serde(flatten)]
    document: Document,
}

pub fn save_canonical(dataset: &Dataset, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    let header = Header {
        format_version: FORMAT_VERSION,
        schema: dataset.schema.clone(),
    };
    serde_json::to_writer(&mut out, &header).expect("schema serializes");
    out.push(b'\n');
    for document in &dataset.documents {
        let line = DocumentLineOut {
            format_version: FORMAT_VERSION,
            document,
        };
        serde_json::to_writer(&mut out, &line).expect("document serializes");
        out.push(b'\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err)
}

/// Reads a dataset file written by [`save_canonical`]; the header is required.
pub fn load_canonical(path: &Path) -> Result<Dataset, CorpusError> {
    let text = read(path)?;
    let (schema, documents) = parse(&text)?;
    let schema = schema.ok_or(CorpusError::Malformed {
        line: 1,
        message: "missing schema header line".into(),
    })?;
    finish(schema, documents)
}

/// Reads canonical documents carrying gold constraints, validated against the
/// supplied schema. A header line, if present, is ignored.
pub fn load_constraint_dataset(path: &Path, schema: SchemaDescriptor) -> Result<Dataset, CorpusError> {
    let text = read(path)?;
    let (_, documents) = parse(&text)?;
    finish(schema, documents)
}

/// Loads either layout: canonical files are recognised by a
/// `format_version` field on the first line, anything else is read as a
/// PET export. `schema` overrides the file's own (or the bundled PET) schema.
pub fn load_dataset(path: &Path, schema: Option<SchemaDescriptor>) -> Result<Dataset, CorpusError> {
    let text = read(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let canonical = serde_json::from_str::<serde_json::Value>(first)
        .ok()
        .is_some_and(|v| v.get("format_version").is_some());
    if !canonical {
        return super::parse_pet(&text, schema.unwrap_or_else(super::pet_schema));
    }
    let (header, documents) = parse(&text)?;
    let schema = schema.or(header).ok_or(CorpusError::Malformed {
        line: 1,
        message: "missing schema header line and no schema given".into(),
    })?;
    finish(schema, documents)
}

fn finish(schema: SchemaDescriptor, documents: Vec<Document>) -> Result<Dataset, CorpusError> {
    let problems = schema.check();
    if !problems.is_empty() {
        return Err(CorpusError::InvalidSchema {
            dataset: schema.dataset_name,
            problems,
        });
    }
    Dataset { schema, documents }.checked()
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn parse(text: &str) -> Result<(Option<SchemaDescriptor>, Vec<Document>), CorpusError> {
    let mut schema = None;
    let mut documents = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = k + 1;
        let malformed = |message: String| CorpusError::Malformed { line: line_no, message };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(FORMAT_VERSION as u64) {
            return Err(malformed(format!(
                "unsupported format_version {:?} (expected {FORMAT_VERSION})",
                value.get("format_version")
            )));
        }
        if value.get("schema").is_some() && value.get("id").is_none() {
            if schema.is_some() || !documents.is_empty() {
                return Err(malformed("schema header must be the first line".into()));
            }
            let header: Header = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
            schema = Some(header.schema);
            continue;
        }
        let line: DocumentLineIn = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        debug_assert_eq!(line.format_version, FORMAT_VERSION);
        documents.push(line.document);
    }
    Ok((schema, documents))
}
