//! Value types shared by every pipeline stage.
//!
//! All types here are immutable once constructed and cheap to clone, so they
//! can be shared freely across threads.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Errors raised while validating domain values.
#[derive(Debug, thiserror::Error)]
pub enum DomainError {
    #[error("sentiment value {0} outside the allowed range 0..=5")]
    SchemaViolation(i64),
    #[error("aspect set invalid: {0}")]
    InvalidAspectSet(String),
    #[error("annotation has {got} values but the aspect set has {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// One sentiment dimension: a short identifier plus the one-line explanation
/// embedded verbatim in prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectDef {
    pub name: String,
    pub description: String,
}

/// Ordered catalog of the sentiment dimensions under annotation.
///
/// The order is load-bearing: it defines the vector layout of every
/// annotation downstream, including file formats. Exactly one aspect is
/// designated as the overall rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AspectSet {
    aspects: Vec<AspectDef>,
    overall_index: usize,
}

#[derive(Deserialize)]
struct AspectSetRaw {
    aspects: Vec<AspectDef>,
    overall_index: usize,
}

impl AspectSet {
    pub fn new(aspects: Vec<AspectDef>, overall_index: usize) -> Result<Self, DomainError> {
        if aspects.is_empty() {
            return Err(DomainError::InvalidAspectSet("no aspects".into()));
        }
        if overall_index >= aspects.len() {
            return Err(DomainError::InvalidAspectSet(format!(
                "overall_index {} out of range for {} aspects",
                overall_index,
                aspects.len()
            )));
        }
        for a in &aspects {
            if a.name.is_empty() {
                return Err(DomainError::InvalidAspectSet("empty aspect name".into()));
            }
            if a.description.is_empty() {
                return Err(DomainError::InvalidAspectSet(format!(
                    "aspect {:?} has an empty description",
                    a.name
                )));
            }
        }
        for (i, a) in aspects.iter().enumerate() {
            if aspects[..i].iter().any(|b| b.name == a.name) {
                return Err(DomainError::InvalidAspectSet(format!(
                    "duplicate aspect name {:?}",
                    a.name
                )));
            }
        }
        Ok(Self {
            aspects,
            overall_index,
        })
    }

    /// The default 14-dimension restaurant catalog shipped with the crate.
    pub fn default_restaurant() -> Self {
        let json = include_str!("../assets/aspects.json");
        Self::from_json(json).expect("bundled aspect catalog is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, DomainError> {
        let raw: AspectSetRaw =
            serde_json::from_str(json).map_err(|e| DomainError::InvalidAspectSet(e.to_string()))?;
        Self::new(raw.aspects, raw.overall_index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aspect set serializes")
    }

    pub fn aspects(&self) -> &[AspectDef] {
        &self.aspects
    }

    /// Number of dimensions, `K`.
    pub fn len(&self) -> usize {
        self.aspects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aspects.is_empty()
    }

    pub fn overall_index(&self) -> usize {
        self.overall_index
    }

    pub fn name_at(&self, k: usize) -> &str {
        &self.aspects[k].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.aspects.iter().map(|a| a.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.aspects.iter().position(|a| a.name == name)
    }
}

/// A per-aspect sentiment label: 0 means "aspect not mentioned", 1-5 is a
/// Likert polarity.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(try_from = "i64", into = "i64")]
pub struct SentimentValue(u8);

impl SentimentValue {
    pub const NOT_MENTIONED: SentimentValue = SentimentValue(0);

    pub fn get(self) -> u8 {
        self.0
    }

    /// Whether the aspect is mentioned at all (the derived indicator).
    pub fn is_mentioned(self) -> bool {
        self.0 != 0
    }
}

/// Checks that `raw` lies in the declared label set `{0,...,5}`.
pub fn validate_sentiment(raw: i64) -> Result<SentimentValue, DomainError> {
    if (0..=5).contains(&raw) {
        Ok(SentimentValue(raw as u8))
    } else {
        Err(DomainError::SchemaViolation(raw))
    }
}

impl TryFrom<i64> for SentimentValue {
    type Error = DomainError;
    fn try_from(raw: i64) -> Result<Self, Self::Error> {
        validate_sentiment(raw)
    }
}

impl From<SentimentValue> for i64 {
    fn from(v: SentimentValue) -> i64 {
        i64::from(v.0)
    }
}

impl fmt::Display for SentimentValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One review from the corpus, in the line-delimited JSON shape of the input
/// files. `posted_at` keeps the source's ISO date string; ISO dates compare
/// correctly as strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub review_id: String,
    pub user_id: String,
    pub business_id: String,
    #[serde(deserialize_with = "stars_from_number")]
    pub stars: u8,
    pub text: String,
    #[serde(rename = "date")]
    pub posted_at: String,
}

/// Star fields in public review dumps are often floats (`4.0`); accept any
/// number whose value is an integer in 1..=5.
fn stars_from_number<'de, D>(de: D) -> Result<u8, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v = f64::deserialize(de)?;
    if v.fract() == 0.0 && (1.0..=5.0).contains(&v) {
        Ok(v as u8)
    } else {
        Err(serde::de::Error::custom(format!(
            "stars value {v} is not an integer in 1..=5"
        )))
    }
}

/// One virtual annotator's response for one review: the per-aspect sentiment
/// vector, in aspect-set order.
///
/// Only the values are stored; the mention indicator is derived as
/// `values[k] != 0`, so the two can never disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerAnnotation {
    pub worker_index: u32,
    pub seed: u64,
    pub values: Vec<SentimentValue>,
}

impl WorkerAnnotation {
    pub fn new(worker_index: u32, seed: u64, values: Vec<SentimentValue>) -> Self {
        Self {
            worker_index,
            seed,
            values,
        }
    }

    /// Derived mention indicator for aspect `k`: 1 iff the value is nonzero.
    pub fn mention(&self, k: usize) -> u8 {
        u8::from(self.values[k].is_mentioned())
    }

    pub fn check_len(&self, aspects: &AspectSet) -> Result<(), DomainError> {
        if self.values.len() == aspects.len() {
            Ok(())
        } else {
            Err(DomainError::LengthMismatch {
                got: self.values.len(),
                expected: aspects.len(),
            })
        }
    }
}

/// Aggregated annotation after the two-stage median vote.
///
/// Invariant: `sentiment[k] = mention[k] * value[k]` for every aspect, so the
/// sentiment is 0 whenever the mention vote is 0, even if the nonzero-median
/// polarity vote is positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VotedAnnotation {
    pub mention: Vec<u8>,
    pub value: Vec<u8>,
    pub sentiment: Vec<u8>,
    pub worker_count_used: usize,
}

impl VotedAnnotation {
    /// Verifies the structural invariants; used by tests and when reading
    /// voted files produced elsewhere.
    pub fn check(&self) -> Result<(), DomainError> {
        let k = self.mention.len();
        if self.value.len() != k || self.sentiment.len() != k {
            return Err(DomainError::LengthMismatch {
                got: self.value.len().max(self.sentiment.len()),
                expected: k,
            });
        }
        for i in 0..k {
            if self.mention[i] > 1 {
                return Err(DomainError::SchemaViolation(i64::from(self.mention[i])));
            }
            if self.value[i] > 5 {
                return Err(DomainError::SchemaViolation(i64::from(self.value[i])));
            }
            if self.sentiment[i] != self.mention[i] * self.value[i] {
                return Err(DomainError::InvalidAspectSet(format!(
                    "sentiment[{i}] != mention[{i}] * value[{i}]"
                )));
            }
        }
        Ok(())
    }
}

/// Why a review could not be (fully) annotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    NoJson,
    SchemaViolation,
    BackendError,
    AllWorkersFailed,
}

/// Per-worker outcome summary attached to a failure record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerStatus {
    pub worker_index: u32,
    pub seed: u64,
    /// "ok", "no-json", "schema-violation", "backend-error", or "timeout".
    pub status: String,
}

/// Emitted when at least one worker failed for a review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFailure {
    pub review_id: String,
    pub workers: Vec<WorkerStatus>,
    pub reason: FailureReason,
}
