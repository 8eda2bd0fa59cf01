use regex::Regex;

use super::{approximate_tokens, ChatRequest, Completion, LlmError, Provider};

#[derive(Debug, Clone)]
pub enum Pattern {
    /// Matches when the prompt contains the string.
    Literal(String),
    /// Matches when the expression finds a match in the prompt; anchor it
    /// with `^`/`\z` as needed.
    Regex(Regex),
}

impl Pattern {
    pub fn regex(expr: &str) -> Result<Self, regex::Error> {
        Regex::new(expr).map(Pattern::Regex)
    }

    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            Pattern::Literal(s) => prompt.contains(s.as_str()),
            Pattern::Regex(r) => r.is_match(prompt),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StubRule {
    pub pattern: Pattern,
    pub response: String,
}

/// Answers with the response of the first rule whose pattern matches the
/// prompt, or with the empty string.
#[derive(Debug, Clone)]
pub struct StubProvider {
    rules: Vec<StubRule>,
}

impl StubProvider {
    pub fn new(rules: Vec<StubRule>) -> Self {
        StubProvider { rules }
    }

    pub fn respond(&self, prompt: &str) -> &str {
        self.rules
            .iter()
            .find(|r| r.pattern.matches(prompt))
            .map(|r| r.response.as_str())
            .unwrap_or("")
    }
}

pub fn stub_provider(rules: Vec<(Pattern, String)>) -> StubProvider {
    StubProvider::new(
        rules
            .into_iter()
            .map(|(pattern, response)| StubRule { pattern, response })
            .collect(),
    )
}

impl Provider for StubProvider {
    fn name(&self) -> &str {
        "stub"
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let text = self.respond(&request.prompt_text).to_string();
        Ok(Completion {
            input_token_count: approximate_tokens(&request.prompt_text),
            output_token_count: approximate_tokens(&text),
            text,
        })
    }
}

/// A provider backed by a plain function of the prompt text.
pub struct FnProvider<F> {
    name: String,
    respond: F,
}

impl<F: Fn(&str) -> String + Send + Sync> FnProvider<F> {
    pub fn new(name: impl Into<String>, respond: F) -> Self {
        FnProvider {
            name: name.into(),
            respond,
        }
    }
}

impl<F: Fn(&str) -> String + Send + Sync> Provider for FnProvider<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let text = (self.respond)(&request.prompt_text);
        Ok(Completion {
            input_token_count: approximate_tokens(&request.prompt_text),
            output_token_count: approximate_tokens(&text),
            text,
        })
    }
}
