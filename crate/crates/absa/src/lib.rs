//! Aspect-based sentiment annotation pipeline built around a local
//! chat-completion backend.
//!
//! The pipeline treats repeated seed-varied inferences as virtual annotators:
//! each review is annotated by `W` workers (one request per seed), the raw
//! responses are parsed into per-aspect sentiment vectors, and the workers'
//! votes are aggregated with a two-stage median mechanism (first on whether an
//! aspect is mentioned, then on the polarity among the nonzero votes).
//! Downstream modules evaluate the voted annotations against ground-truth
//! ratings and fit regression models linking aspect sentiments to the overall
//! rating.
//!
//! Modules follow the pipeline stages:
//!
//! - [`domain`]: shared value types (aspect catalogs, reviews, annotations)
//! - [`ingest`]: corpus loading, per-user sampling, summary statistics
//! - [`prompt`]: prompt assembly from a template, aspect catalog, and
//!   one-shot example
//! - [`inference`]: backend clients (HTTP and deterministic mock) and the
//!   seed-ensemble worker runner
//! - [`extract`]: tolerant JSON extraction and annotation parsing
//! - [`voting`]: the two-stage median majority vote
//! - [`eval`]: concordance / correlation / RMSE metrics, chance baseline,
//!   and lift reporting
//! - [`regress`]: Gaussian GLM fitting, exhaustive BIC subset selection,
//!   and cross-model coefficient comparison
//! - [`report`]: aligned-text rendering of evaluation and regression tables

pub mod domain;
pub mod eval;
pub mod extract;
pub mod inference;
pub mod ingest;
pub mod prompt;
pub mod regress;
pub mod report;
pub mod voting;

pub use domain::{
    AnnotationFailure, AspectDef, AspectSet, ReviewRecord, SentimentValue, VotedAnnotation,
    WorkerAnnotation,
};
