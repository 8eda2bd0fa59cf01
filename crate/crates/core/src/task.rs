use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four extraction tasks a prompt can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Mention detection.
    #[serde(rename = "MD")]
    Md,
    /// Entity resolution.
    #[serde(rename = "ER")]
    Er,
    /// Relation extraction.
    #[serde(rename = "RE")]
    Re,
    /// Declarative constraint extraction.
    #[serde(rename = "CE")]
    Ce,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Md, Task::Er, Task::Re, Task::Ce];

    pub fn code(self) -> &'static str {
        match self {
            Task::Md => "MD",
            Task::Er => "ER",
            Task::Re => "RE",
            Task::Ce => "CE",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            Task::Md => "mention detection",
            Task::Er => "entity resolution",
            Task::Re => "relation extraction",
            Task::Ce => "constraint extraction",
        }
    }

    pub fn section_suffix(self) -> &'static str {
        match self {
            Task::Md => "md",
            Task::Er => "er",
            Task::Re => "re",
            Task::Ce => "ce",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task `{0}` (expected MD, ER, RE or CE)")]
pub struct UnknownTask(pub String);

impl FromStr for Task {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MD" => Ok(Task::Md),
            "ER" => Ok(Task::Er),
            "RE" => Ok(Task::Re),
            "CE" => Ok(Task::Ce),
            _ => Err(UnknownTask(s.to_string())),
        }
    }
}
