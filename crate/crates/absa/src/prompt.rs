//! Prompt assembly: instruction, aspect catalog, output schema, one-shot
//! example, and the review under annotation, rendered through a plain-text
//! template with named placeholders.
//!
//! The template ships as a versioned asset rather than a hard-coded string
//! because prompt wording materially affects results; runs record the
//! template hash so experiments stay comparable.

use crate::domain::{validate_sentiment, AspectSet, ReviewRecord, WorkerAnnotation};
use crate::extract::canonical_json;
use serde::Deserialize;
use std::collections::BTreeMap;

/// Prompt-side token budget; chosen for backends with an 8192-token context
/// window.
pub const DEFAULT_CONTEXT_BUDGET: usize = 8192;

pub const PLACEHOLDERS: [&str; 5] = [
    "{{instruction}}",
    "{{aspects}}",
    "{{schema}}",
    "{{example}}",
    "{{review}}",
];

const DEFAULT_INSTRUCTION: &str = "You are annotating one restaurant review on a fixed set of \
aspects. For each aspect, output an integer from 1 (very negative) to 5 (very positive) if the \
review mentions that aspect, or 0 if it does not mention it. Output the JSON object only, with \
no extra commentary.";

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("template is missing required placeholder {0}")]
    MissingPlaceholder(&'static str),
    #[error("template contains unresolved placeholder {0}")]
    UnresolvedPlaceholder(String),
    #[error("rendered prompt is {tokens} tokens, over the budget of {budget}")]
    ContextOverflow { tokens: usize, budget: usize },
    #[error("one-shot gold answer does not cover aspect {0:?}")]
    GoldMissingAspect(String),
    #[error("one-shot gold answer names unknown aspect {0:?}")]
    GoldUnknownAspect(String),
    #[error("one-shot example invalid: {0}")]
    InvalidExample(String),
}

/// Counts tokens for budget checks. Exact backend-tokenizer parity is not
/// required; counts are only used to guard the context window.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// Default approximation: whitespace-separated words.
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Nonnegative token estimate for `text` under the given counter.
pub fn estimate_tokens(text: &str, counter: &dyn TokenCounter) -> usize {
    counter.count(text)
}

/// Plain-text template with the named placeholders of [`PLACEHOLDERS`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    /// The template bundled with the crate.
    pub fn bundled() -> Self {
        Self::new(include_str!("../assets/prompt_template.txt"))
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// A worked example embedded in the prompt: one review plus its gold
/// annotation covering every aspect.
#[derive(Debug, Clone, Deserialize)]
pub struct OneShotExample {
    pub review_text: String,
    pub gold: BTreeMap<String, i64>,
}

impl OneShotExample {
    /// The example bundled with the crate, written for the default catalog.
    pub fn bundled() -> Self {
        serde_json::from_str(include_str!("../assets/one_shot_example.json"))
            .expect("bundled example is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, PromptError> {
        serde_json::from_str(json).map_err(|e| PromptError::InvalidExample(e.to_string()))
    }

    /// Orders the gold answer into aspect-set layout, requiring exact key
    /// coverage.
    pub fn gold_annotation(&self, aspects: &AspectSet) -> Result<WorkerAnnotation, PromptError> {
        for key in self.gold.keys() {
            if aspects.index_of(key).is_none() {
                return Err(PromptError::GoldUnknownAspect(key.clone()));
            }
        }
        let mut values = Vec::with_capacity(aspects.len());
        for name in aspects.names() {
            let raw = *self
                .gold
                .get(name)
                .ok_or_else(|| PromptError::GoldMissingAspect(name.to_string()))?;
            let value =
                validate_sentiment(raw).map_err(|e| PromptError::InvalidExample(e.to_string()))?;
            values.push(value);
        }
        Ok(WorkerAnnotation::new(0, 0, values))
    }
}

fn aspects_block(aspects: &AspectSet) -> String {
    aspects
        .aspects()
        .iter()
        .map(|a| format!("- {}: {}", a.name, a.description))
        .collect::<Vec<_>>()
        .join("\n")
}

fn schema_block(aspects: &AspectSet) -> String {
    let body = aspects
        .names()
        .map(|name| {
            format!(
                "  {}: <integer 0-5>",
                serde_json::to_string(name).expect("string serializes")
            )
        })
        .collect::<Vec<_>>()
        .join(",\n");
    format!("{{\n{body}\n}}")
}

fn example_block(example: &OneShotExample, aspects: &AspectSet) -> Result<String, PromptError> {
    let gold = example.gold_annotation(aspects)?;
    Ok(format!(
        "Review: {}\nAnswer: {}",
        example.review_text,
        canonical_json(&gold, aspects)
    ))
}

/// Renders the full prompt, deterministically for fixed inputs.
///
/// Placeholders are substituted in document order: instruction, aspect list,
/// output schema, worked example, target review. The rendered text is
/// checked against the token budget before being returned.
pub fn build_prompt(
    template: &PromptTemplate,
    aspects: &AspectSet,
    example: &OneShotExample,
    review: &ReviewRecord,
    counter: &dyn TokenCounter,
    budget: usize,
) -> Result<String, PromptError> {
    for required in PLACEHOLDERS {
        if !template.text.contains(required) {
            return Err(PromptError::MissingPlaceholder(required));
        }
    }

    let rendered = template
        .text
        .replace("{{instruction}}", DEFAULT_INSTRUCTION)
        .replace("{{aspects}}", &aspects_block(aspects))
        .replace("{{schema}}", &schema_block(aspects))
        .replace("{{example}}", &example_block(example, aspects)?)
        .replace("{{review}}", &review.text);

    if let Some(start) = rendered.find("{{") {
        if let Some(end) = rendered[start..].find("}}") {
            return Err(PromptError::UnresolvedPlaceholder(
                rendered[start..start + end + 2].to_string(),
            ));
        }
    }

    let tokens = estimate_tokens(&rendered, counter);
    if tokens > budget {
        return Err(PromptError::ContextOverflow { tokens, budget });
    }
    Ok(rendered)
}
