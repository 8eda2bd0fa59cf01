use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ablation::AblationReport;
use super::grid::{CellOutcome, GridReport};
use super::PipelineError;
use crate::task::Task;

/// Published scores shown next to measured ones; never used in computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Reference rows per dataset and task, loaded from `baselines.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Baselines(pub BTreeMap<String, BTreeMap<Task, ReferenceScores>>);

impl Baselines {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Io(format!("baselines: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Rows for a dataset, matched case-insensitively by name.
    pub fn get(&self, dataset: &str, task: Task) -> Option<&ReferenceScores> {
        self.0
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(dataset))
            .and_then(|(_, rows)| rows.get(&task))
    }
}

fn title(task: Task) -> String {
    task.long_name()
        .split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_ascii_uppercase().to_string() + c.as_str())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn setting(shots: usize) -> String {
    if shots == 0 {
        "Zero-shot".to_string()
    } else {
        format!("{shots}-shot")
    }
}

fn tidy(text: &str) -> String {
    text.lines().map(|l| l.trim_end().to_string() + "\n").collect()
}

const GRID_WIDTH: usize = 66;

/// Table-1 style text: per task a block of rows (baseline first, then one
/// per shot count) with precision, recall, F1 and parsing errors.
pub(crate) fn grid_table(report: &GridReport, baselines: &Baselines) -> String {
    let mut out = String::new();
    writeln!(out, "Dataset: {}", report.dataset_name).unwrap();
    writeln!(
        out,
        "{:<24}{:<12}{:>7}{:>7}{:>7}{:>9}",
        "Task", "Setting", "P", "R", "F1", "Errors"
    )
    .unwrap();
    writeln!(out, "{}", "-".repeat(GRID_WIDTH)).unwrap();
    let mut tasks: Vec<Task> = Vec::new();
    for c in &report.cells {
        if !tasks.contains(&c.task) {
            tasks.push(c.task);
        }
    }
    for task in tasks {
        let mut name = title(task);
        let mut row = |out: &mut String, setting: &str, rest: String| {
            writeln!(out, "{:<24}{:<12}{rest}", std::mem::take(&mut name), setting).unwrap();
        };
        match baselines.get(&report.dataset_name, task) {
            Some(b) => row(
                &mut out,
                "Baseline",
                format!("{:>7.2}{:>7.2}{:>7.2}{:>9}", b.precision, b.recall, b.f1, ""),
            ),
            None => row(&mut out, "Baseline", format!("{:>7}{:>7}{:>7}{:>9}", "-", "-", "-", "")),
        }
        for c in report.cells.iter().filter(|c| c.task == task) {
            let rest = match &c.outcome {
                CellOutcome::Scored { scores, parse_errors } => format!(
                    "{:>7.3}{:>7.3}{:>7.3}{:>9}",
                    scores.precision, scores.recall, scores.f1, parse_errors
                ),
                CellOutcome::Failed { .. } => {
                    format!("{:>7}{:>7}{:>7}{:>9}", "n/a", "n/a", "n/a", "failed")
                }
            };
            row(&mut out, &setting(c.shot_count), rest);
        }
    }
    tidy(&out)
}

/// Table-3 style text: one row per variant, and per task the relative F1,
/// absolute F1 and parsing errors.
pub(crate) fn ablation_table(report: &AblationReport) -> String {
    let mut out = String::new();
    writeln!(out, "Dataset: {} ({}-shot)", report.dataset_name, report.shot_count).unwrap();
    let mut head1 = format!("{:<24}", "");
    let mut head2 = format!("{:<24}", "Experiment");
    for t in &report.tasks {
        head1.push_str(&format!("{:>27}", t.task.code()));
        head2.push_str(&format!("{:>9}{:>9}{:>9}", "Rel. F1", "Abs. F1", "Errors"));
    }
    writeln!(out, "{}", head1.trim_end()).unwrap();
    writeln!(out, "{head2}").unwrap();
    writeln!(out, "{}", "-".repeat(24 + 27 * report.tasks.len())).unwrap();
    let labels: Vec<&str> = report
        .tasks
        .first()
        .map(|t| t.rows.iter().map(|r| r.label.as_str()).collect())
        .unwrap_or_default();
    for (k, label) in labels.iter().enumerate() {
        let mut line = format!("{label:<24}");
        for t in &report.tasks {
            let r = &t.rows[k];
            if r.error.is_some() {
                line.push_str(&format!("{:>9}{:>9}{:>9}", "n/a", "n/a", "failed"));
            } else if k == 0 {
                line.push_str(&format!("{:>9}{:>9.3}{:>9}", "-", r.absolute_f1, r.parsing_errors));
            } else {
                line.push_str(&format!(
                    "{:>+9.3}{:>9.3}{:>9}",
                    r.relative_f1, r.absolute_f1, r.parsing_errors
                ));
            }
        }
        writeln!(out, "{line}").unwrap();
    }
    tidy(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn titles_and_settings() {
        assert_eq!(title(Task::Md), "Mention Detection");
        assert_eq!(setting(0), "Zero-shot");
        assert_eq!(setting(3), "3-shot");
    }

    #[test]
    fn baselines_lookup() {
        let b = Baselines::parse(r#"{"PET": {"MD": {"precision": 0.73, "recall": 0.64, "f1": 0.69}}}"#).unwrap();
        assert_eq!(b.get("pet", Task::Md).unwrap().f1, 0.69);
        assert!(b.get("pet", Task::Re).is_none());
        assert!(Baselines::parse("[").is_err());
    }
}
