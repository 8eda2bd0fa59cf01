//! Prompt-template files: plain text with one `[section]` per component,
//! optionally specialised per task as `[section.md]`, `[section.re]`, and so
//! on. Section bodies may use `{placeholder}` fields; `{{` and `}}` produce
//! literal braces. Lines starting with `#` before the first section are
//! comments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PromptComponentKind, PromptError};
use crate::task::Task;

const DEFAULT_TEMPLATE: &str = include_str!("../../../../data/prompts/default.txt");

/// Names a section body may reference.
pub const PLACEHOLDERS: &[&str] = &[
    "dataset",
    "task_name",
    "task_code",
    "type_names",
    "type_definitions",
    "disambiguation_hints",
    "format_line",
    "shot_examples",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    /// Keyed by `section` or `section.task`.
    sections: BTreeMap<String, String>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::parse(DEFAULT_TEMPLATE).expect("bundled prompt template is valid")
    }
}

impl PromptTemplate {
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path).map_err(|e| PromptError::Template {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        let flush = |current: Option<(String, Vec<&str>)>, sections: &mut BTreeMap<String, String>| {
            if let Some((name, lines)) = current {
                sections.insert(name, lines.join("\n").trim().to_string());
            }
        };
        for (k, line) in text.lines().enumerate() {
            let trimmed = line.trim_end();
            if let Some(header) = trimmed.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
                let name = header.trim().to_string();
                check_section_name(&name, k + 1)?;
                if sections.contains_key(&name) || current.as_ref().is_some_and(|(n, _)| *n == name) {
                    return Err(PromptError::Template {
                        line: k + 1,
                        message: format!("duplicate section [{name}]"),
                    });
                }
                flush(current.take(), &mut sections);
                current = Some((name, Vec::new()));
                continue;
            }
            match current.as_mut() {
                Some((_, lines)) => lines.push(line),
                None if trimmed.is_empty() || trimmed.starts_with('#') => {}
                None => {
                    return Err(PromptError::Template {
                        line: k + 1,
                        message: "text outside of any section".into(),
                    })
                }
            }
        }
        flush(current, &mut sections);
        for (name, body) in &sections {
            check_placeholders(name, body)?;
        }
        Ok(PromptTemplate { sections })
    }

    /// The task-specific section if present, else the generic one.
    pub fn section(&self, kind: PromptComponentKind, task: Task) -> Option<&str> {
        self.sections
            .get(&format!("{}.{}", kind.section_name(), task.section_suffix()))
            .or_else(|| self.sections.get(kind.section_name()))
            .map(String::as_str)
    }

    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, body) in &self.sections {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(body.as_bytes());
            hasher.update([0]);
        }
        hex::encode(hasher.finalize())
    }
}

fn check_section_name(name: &str, line: usize) -> Result<(), PromptError> {
    let (base, suffix) = match name.split_once('.') {
        Some((b, s)) => (b, Some(s)),
        None => (name, None),
    };
    let known_kind = PromptComponentKind::ALL.iter().any(|k| k.section_name() == base);
    let known_task = suffix.is_none_or(|s| Task::ALL.iter().any(|t| t.section_suffix() == s));
    if known_kind && known_task {
        Ok(())
    } else {
        Err(PromptError::Template {
            line,
            message: format!("unknown section [{name}]"),
        })
    }
}

enum Piece<'a> {
    Text(&'a str),
    Brace(char),
    Field(&'a str),
}

fn pieces(body: &str) -> Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push(Piece::Text(&rest[..pos]));
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push(Piece::Brace('{'));
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push(Piece::Brace('}'));
            rest = after;
        } else if tail.starts_with('{') {
            let end = tail.find('}').ok_or_else(|| "unclosed `{`".to_string())?;
            out.push(Piece::Field(&tail[1..end]));
            rest = &tail[end + 1..];
        } else {
            return Err("stray `}` (write `}}` for a literal brace)".into());
        }
    }
    out.push(Piece::Text(rest));
    Ok(out)
}

fn check_placeholders(section: &str, body: &str) -> Result<(), PromptError> {
    let err = |message: String| PromptError::Template { line: 0, message };
    for piece in pieces(body).map_err(|e| err(format!("[{section}]: {e}")))? {
        if let Piece::Field(name) = piece {
            if !PLACEHOLDERS.contains(&name) {
                return Err(err(format!("[{section}]: unknown placeholder {{{name}}}")));
            }
        }
    }
    Ok(())
}

/// Substitutes placeholders; the body has already been checked at parse time.
pub(crate) fn fill(body: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::with_capacity(body.len());
    for piece in pieces(body).expect("template checked at parse time") {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Brace(c) => out.push(c),
            Piece::Field(name) => out.push_str(values.get(name).map(String::as_str).unwrap_or("")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_task_overrides() {
        let t = PromptTemplate::parse("# comment\n[persona]\nYou are {task_name}.\n\n[persona.re]\nRE persona {{x}}\n")
            .unwrap();
        assert_eq!(
            t.section(PromptComponentKind::Persona, Task::Md),
            Some("You are {task_name}.")
        );
        assert_eq!(
            t.section(PromptComponentKind::Persona, Task::Re),
            Some("RE persona {{x}}")
        );
        let mut values = BTreeMap::new();
        values.insert("task_name", "mention detection".to_string());
        assert_eq!(
            fill("You are {task_name}. {{ok}}", &values),
            "You are mention detection. {ok}"
        );
    }

    #[test]
    fn rejects_unknown_sections_and_placeholders() {
        assert!(PromptTemplate::parse("[persona.xx]\nhi").is_err());
        assert!(PromptTemplate::parse("[nonsense]\nhi").is_err());
        assert!(PromptTemplate::parse("[persona]\n{nope}").is_err());
        assert!(PromptTemplate::parse("[persona]\n{unclosed").is_err());
        assert!(PromptTemplate::parse("stray\n[persona]\nhi").is_err());
        assert!(PromptTemplate::parse("[persona]\na\n[persona]\nb").is_err());
    }

    #[test]
    fn default_template_covers_every_component() {
        let t = PromptTemplate::default();
        for kind in PromptComponentKind::ALL {
            for task in Task::ALL {
                assert!(t.section(kind, task).is_some(), "{kind:?} {task:?}");
            }
        }
    }
}
