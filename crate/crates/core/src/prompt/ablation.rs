use super::{Brevity, PromptComponentKind, PromptConfig, PromptError};

pub const BASELINE_LABEL: &str = "Baseline";

/// Row labels in report order, baseline first.
pub const ABLATION_LABELS: [&str; 10] = [
    BASELINE_LABEL,
    "No Format Examples",
    "No Context Manager",
    "No Persona",
    "No Meta Language",
    "No Chain of Thought",
    "No Disambiguation",
    "No Reflection",
    "No Fact Check List",
    "Very Short Prompt",
];

const REMOVED: [PromptComponentKind; 8] = [
    PromptComponentKind::FormatExample,
    PromptComponentKind::ContextManager,
    PromptComponentKind::Persona,
    PromptComponentKind::MetaLanguage,
    PromptComponentKind::ChainOfThought,
    PromptComponentKind::Disambiguation,
    PromptComponentKind::Reflection,
    PromptComponentKind::FactList,
];

/// The baseline plus nine single-change variants. Few-shot settings carry
/// over unchanged.
pub fn ablation_variants(base: &PromptConfig) -> Result<Vec<(String, PromptConfig)>, PromptError> {
    let all_enabled = PromptComponentKind::ALL.iter().all(|k| base.enabled.contains(k));
    if !all_enabled || base.brevity != Brevity::Full {
        return Err(PromptError::NotFullBase);
    }
    let mut out = vec![(BASELINE_LABEL.to_string(), base.clone())];
    for (label, kind) in ABLATION_LABELS[1..9].iter().zip(REMOVED) {
        let mut config = base.clone();
        config.enabled.remove(&kind);
        out.push((label.to_string(), config));
    }
    let mut short = base.clone();
    short.brevity = Brevity::VeryShort;
    out.push((ABLATION_LABELS[9].to_string(), short));
    Ok(out)
}
