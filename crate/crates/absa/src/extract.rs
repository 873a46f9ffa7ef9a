//! Turning raw model responses into validated worker annotations.
//!
//! Models are asked for JSON but frequently wrap it in prose or code fences,
//! emit floats instead of integers, or drop keys. This module extracts the
//! first balanced JSON object, repairs the recoverable defects while
//! recording each one, and only gives up when the content is genuinely
//! unusable (no JSON at all, or a non-numeric value).

use crate::domain::{validate_sentiment, AspectSet, SentimentValue, WorkerAnnotation};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("no balanced JSON object found in response")]
    NoJson,
}

/// A repair applied while parsing; always recorded so that repaired
/// annotations stay auditable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Defect {
    MissingKey { key: String },
    ExtraKey { key: String },
    ClampedValue { key: String, raw: String },
    NonIntegerCoerced { key: String },
    FenceStripped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseStatus {
    Parsed,
    Repaired,
    Failed,
}

/// Outcome of parsing one worker response. `annotation` is present unless
/// the status is failed, and a parsed status implies an empty defect list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub status: ParseStatus,
    pub annotation: Option<WorkerAnnotation>,
    pub defects: Vec<Defect>,
    /// Reason text, present only when failed.
    pub failure: Option<String>,
}

impl ParseOutcome {
    fn failed(reason: impl Into<String>) -> Self {
        ParseOutcome {
            status: ParseStatus::Failed,
            annotation: None,
            defects: Vec::new(),
            failure: Some(reason.into()),
        }
    }
}

/// Extraction result: the candidate JSON text plus whether a code fence had
/// to be stripped to find it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedJson {
    pub text: String,
    pub fence_stripped: bool,
}

/// Finds the first balanced top-level JSON object, stripping code fences and
/// surrounding prose. Scanning is brace-balance based and respects string
/// literals, so braces inside quoted values do not confuse it.
pub fn extract_json(raw: &str) -> Result<ExtractedJson, ExtractError> {
    if let Some(inner) = fenced_block(raw) {
        if let Some(obj) = first_balanced_object(inner) {
            return Ok(ExtractedJson {
                text: obj.to_string(),
                fence_stripped: true,
            });
        }
    }
    match first_balanced_object(raw) {
        Some(obj) => Ok(ExtractedJson {
            text: obj.to_string(),
            fence_stripped: false,
        }),
        None => Err(ExtractError::NoJson),
    }
}

/// Content of the first ``` fenced block, tolerating a language tag after
/// the opening fence.
fn fenced_block(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    let content_start = after.find('\n')? + 1;
    let content = &after[content_start..];
    let end = content.find("```")?;
    Some(&content[..end])
}

fn first_balanced_object(text: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    let mut start = None;

    for (i, ch) in text.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            continue;
        }
        match ch {
            '"' if depth > 0 => in_string = true,
            '{' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start.unwrap()..=i]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Maps an extracted JSON object onto the aspect catalog.
///
/// Missing keys become 0 (not mentioned), unknown keys are dropped, floats
/// equal to an integer are coerced, and out-of-range integers are clamped to
/// the nearest bound; each repair is recorded. Non-numeric values and
/// syntactically invalid JSON fail the worker.
pub fn parse_annotation(
    json_text: &str,
    aspects: &AspectSet,
    worker_index: u32,
    seed: u64,
) -> ParseOutcome {
    let value: serde_json::Value = match serde_json::from_str(json_text) {
        Ok(v) => v,
        Err(e) => return ParseOutcome::failed(format!("invalid JSON: {e}")),
    };
    let Some(object) = value.as_object() else {
        return ParseOutcome::failed("top-level JSON value is not an object");
    };

    let mut defects = Vec::new();
    let mut values: Vec<SentimentValue> = Vec::with_capacity(aspects.len());

    for name in aspects.names() {
        match object.get(name) {
            None => {
                defects.push(Defect::MissingKey { key: name.into() });
                values.push(SentimentValue::NOT_MENTIONED);
            }
            Some(v) => {
                let raw_int = if let Some(i) = v.as_i64() {
                    i
                } else if let Some(f) = v.as_f64() {
                    if f.is_finite() && f.fract() == 0.0 {
                        defects.push(Defect::NonIntegerCoerced { key: name.into() });
                        // Saturate before the i64 cast so huge floats clamp
                        // instead of wrapping.
                        f.clamp(i64::MIN as f64, i64::MAX as f64) as i64
                    } else {
                        return ParseOutcome::failed(format!(
                            "value for {name:?} is not an integer: {v}"
                        ));
                    }
                } else {
                    return ParseOutcome::failed(format!("value for {name:?} is not numeric: {v}"));
                };
                let sentiment = match validate_sentiment(raw_int) {
                    Ok(s) => s,
                    Err(_) => {
                        defects.push(Defect::ClampedValue {
                            key: name.into(),
                            raw: v.to_string(),
                        });
                        validate_sentiment(raw_int.clamp(0, 5)).expect("clamped into range")
                    }
                };
                values.push(sentiment);
            }
        }
    }

    for key in object.keys() {
        if aspects.index_of(key).is_none() {
            defects.push(Defect::ExtraKey { key: key.clone() });
        }
    }

    let status = if defects.is_empty() {
        ParseStatus::Parsed
    } else {
        ParseStatus::Repaired
    };
    ParseOutcome {
        status,
        annotation: Some(WorkerAnnotation::new(worker_index, seed, values)),
        defects,
        failure: None,
    }
}

/// Full response-to-annotation path: extraction followed by parsing, with
/// the fence repair folded into the defect list.
pub fn parse_worker_response(
    raw: &str,
    aspects: &AspectSet,
    worker_index: u32,
    seed: u64,
) -> ParseOutcome {
    let extracted = match extract_json(raw) {
        Ok(e) => e,
        Err(ExtractError::NoJson) => return ParseOutcome::failed("no-json"),
    };
    let mut outcome = parse_annotation(&extracted.text, aspects, worker_index, seed);
    if extracted.fence_stripped && outcome.status != ParseStatus::Failed {
        outcome.defects.push(Defect::FenceStripped);
        outcome.status = ParseStatus::Repaired;
    }
    outcome
}

/// Canonical annotation JSON: exactly the aspect names as keys, integer
/// values, keys emitted in aspect-set order.
pub fn canonical_json(annotation: &WorkerAnnotation, aspects: &AspectSet) -> String {
    let mut out = String::from("{");
    for (k, name) in aspects.names().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        out.push_str(&serde_json::to_string(name).expect("string serializes"));
        out.push_str(": ");
        out.push_str(&annotation.values[k].get().to_string());
    }
    out.push('}');
    out
}
