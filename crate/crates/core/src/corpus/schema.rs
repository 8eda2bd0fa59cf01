//! Dataset schema descriptors: type inventories, their definitions and
//! hints, default match policies and the roles BPMN synthesis relies on.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::eval::MatchPolicy;
use crate::task::Task;

/// One entry of a mention or relation inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeSpec {
    pub name: String,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
}

/// One entry of a Declare constraint inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintTypeSpec {
    pub name: String,
    pub unary: bool,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hints: Vec<String>,
}

/// Which inventory names play which part in process-model synthesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpmnRoles {
    pub activity: String,
    pub actor: String,
    pub data: String,
    pub xor_gateway: String,
    pub and_gateway: String,
    pub condition: String,
    pub flow: String,
    pub uses: String,
    pub performer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub same_gateway: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub dataset_name: String,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub mention_types: Vec<TypeSpec>,
    #[serde(default)]
    pub relation_types: Vec<TypeSpec>,
    #[serde(default)]
    pub constraint_types: Vec<ConstraintTypeSpec>,
    /// Mention types that take part in entity resolution. Mentions of these
    /// types outside any gold cluster count as singleton entities.
    #[serde(default)]
    pub entity_mention_types: Vec<String>,
    #[serde(default)]
    pub policies: BTreeMap<Task, MatchPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bpmn_roles: Option<BpmnRoles>,
}

/// Case-insensitive type key where spaces and underscores are interchangeable.
pub fn type_key(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn lookup<'a>(mut names: impl Iterator<Item = &'a str>, raw: &str) -> Option<&'a str> {
    let key = type_key(raw);
    if key.is_empty() {
        return None;
    }
    names.find(|n| type_key(n) == key)
}

impl SchemaDescriptor {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let schema: SchemaDescriptor = serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        let problems = schema.check();
        if !problems.is_empty() {
            return Err(CorpusError::InvalidSchema {
                dataset: schema.dataset_name,
                problems,
            });
        }
        Ok(schema)
    }

    /// Inventory invariants: unique names per inventory, non-empty definitions,
    /// and role names that resolve.
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut check_inventory = |label: &str, items: Vec<(&str, &str)>| {
            let mut seen = BTreeSet::new();
            for (name, definition) in items {
                if type_key(name).is_empty() {
                    problems.push(format!("{label} type with empty name"));
                }
                if !seen.insert(type_key(name)) {
                    problems.push(format!("duplicate {label} type `{name}`"));
                }
                if definition.trim().is_empty() {
                    problems.push(format!("{label} type `{name}` has an empty definition"));
                }
            }
        };
        check_inventory(
            "mention",
            self.mention_types
                .iter()
                .map(|t| (t.name.as_str(), t.definition.as_str()))
                .collect(),
        );
        check_inventory(
            "relation",
            self.relation_types
                .iter()
                .map(|t| (t.name.as_str(), t.definition.as_str()))
                .collect(),
        );
        check_inventory(
            "constraint",
            self.constraint_types
                .iter()
                .map(|t| (t.name.as_str(), t.definition.as_str()))
                .collect(),
        );
        for name in &self.entity_mention_types {
            if self.mention_type(name).is_none() {
                problems.push(format!("entity mention type `{name}` is not a mention type"));
            }
        }
        if let Some(roles) = &self.bpmn_roles {
            for name in [
                &roles.activity,
                &roles.actor,
                &roles.data,
                &roles.xor_gateway,
                &roles.and_gateway,
                &roles.condition,
            ] {
                if self.mention_type(name).is_none() {
                    problems.push(format!("bpmn role `{name}` is not a mention type"));
                }
            }
            let relation_roles = [&roles.flow, &roles.uses, &roles.performer]
                .into_iter()
                .chain(roles.same_gateway.as_ref());
            for name in relation_roles {
                if self.relation_type(name).is_none() {
                    problems.push(format!("bpmn role `{name}` is not a relation type"));
                }
            }
        }
        problems
    }

    pub fn mention_type(&self, raw: &str) -> Option<&str> {
        lookup(self.mention_types.iter().map(|t| t.name.as_str()), raw)
    }

    pub fn relation_type(&self, raw: &str) -> Option<&str> {
        lookup(self.relation_types.iter().map(|t| t.name.as_str()), raw)
    }

    pub fn constraint_type(&self, raw: &str) -> Option<&ConstraintTypeSpec> {
        let key = type_key(raw);
        self.constraint_types
            .iter()
            .find(|t| !key.is_empty() && type_key(&t.name) == key)
    }

    pub fn is_entity_type(&self, mention_type: &str) -> bool {
        let key = type_key(mention_type);
        self.entity_mention_types.iter().any(|t| type_key(t) == key)
    }

    pub fn supports(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }

    /// Default scoring policy for a task; exact, type-sensitive matching
    /// when the schema names none.
    pub fn policy(&self, task: Task) -> MatchPolicy {
        self.policies.get(&task).copied().unwrap_or_default()
    }

    /// Copy of this schema whose mention inventory is narrowed to one type.
    pub fn restricted_to_mention_type(&self, name: &str) -> Option<SchemaDescriptor> {
        let canonical = self.mention_type(name)?;
        let mut narrowed = self.clone();
        narrowed.mention_types.retain(|t| t.name == canonical);
        narrowed
            .entity_mention_types
            .retain(|t| type_key(t) == type_key(canonical));
        Some(narrowed)
    }
}
