//! `absa annotate`: build each review's prompt, fan it out to the seed
//! workers, parse the responses, and persist raw audit records, parsed
//! annotations, and failure records.
//!
//! The stage is resumable: reviews already present in the annotations or
//! failures file are skipped on rerun. Outputs append in corpus order
//! regardless of worker scheduling, so reruns with the mock backend are
//! byte-reproducible.

use super::{
    append_jsonl, read_jsonl, require_input, AnnotationRecord, CliError, CliResult, OutPaths,
};
use crate::config::{BackendKind, RunConfig};
use crate::manifest::{sha256_hex, RunManifest};
use absa::domain::{AnnotationFailure, AspectSet, FailureReason, ReviewRecord, WorkerStatus};
use absa::extract::{parse_worker_response, ParseStatus};
use absa::inference::{
    run_workers, AuditRecord, ChatBackend, HttpBackend, MockBackend, MockSpec, RawWorkerResponse,
    ResponseStatus, RetryPolicy, WorkerPlan,
};
use absa::ingest::read_corpus_jsonl;
use absa::prompt::{build_prompt, OneShotExample, PromptTemplate, WhitespaceCounter};
use anyhow::Context;
use rayon::prelude::*;
use std::collections::HashSet;

struct ReviewOutcome {
    index: usize,
    audit: Vec<AuditRecord>,
    annotations: Vec<AnnotationRecord>,
    failure: Option<AnnotationFailure>,
}

fn build_backend(config: &RunConfig, aspects: &AspectSet) -> Box<dyn ChatBackend> {
    match config.backend.kind {
        BackendKind::Http => Box::new(HttpBackend::new(&config.backend.config)),
        BackendKind::Mock => Box::new(MockBackend::new(MockSpec {
            aspect_names: aspects.names().map(str::to_string).collect(),
            prose_rate: config.backend.mock.prose_rate,
            fenced_rate: config.backend.mock.fenced_rate,
            malformed_rate: config.backend.mock.malformed_rate,
            empty_rate: config.backend.mock.empty_rate,
        })),
    }
}

fn status_label(response: &RawWorkerResponse) -> String {
    match response.status {
        ResponseStatus::Ok => "ok".into(),
        ResponseStatus::BackendError => "backend-error".into(),
        ResponseStatus::Timeout => "timeout".into(),
    }
}

/// Everything the per-review worker loop needs, shared across threads.
struct AnnotateCtx<'a> {
    backend: &'a dyn ChatBackend,
    retry: RetryPolicy,
    plan: &'a WorkerPlan,
    aspects: &'a AspectSet,
    template: &'a PromptTemplate,
    example: &'a OneShotExample,
    budget: usize,
}

fn annotate_review(ctx: &AnnotateCtx<'_>, index: usize, review: &ReviewRecord) -> ReviewOutcome {
    let prompt = match build_prompt(
        ctx.template,
        ctx.aspects,
        ctx.example,
        review,
        &WhitespaceCounter,
        ctx.budget,
    ) {
        Ok(p) => p,
        Err(err) => {
            log::warn!("review {}: cannot build prompt: {err}", review.review_id);
            return ReviewOutcome {
                index,
                audit: Vec::new(),
                annotations: Vec::new(),
                failure: Some(AnnotationFailure {
                    review_id: review.review_id.clone(),
                    workers: Vec::new(),
                    reason: FailureReason::AllWorkersFailed,
                }),
            };
        }
    };

    let responses = run_workers(ctx.backend, &ctx.retry, &prompt, ctx.plan);

    let mut audit = Vec::with_capacity(responses.len());
    let mut annotations = Vec::new();
    let mut worker_statuses = Vec::with_capacity(responses.len());
    let mut first_failure: Option<FailureReason> = None;

    for response in responses {
        let label;
        if response.is_ok() {
            let outcome = parse_worker_response(
                &response.raw,
                ctx.aspects,
                response.worker_index,
                response.seed,
            );
            match outcome.status {
                ParseStatus::Failed => {
                    let reason = if outcome.failure.as_deref() == Some("no-json") {
                        FailureReason::NoJson
                    } else {
                        FailureReason::SchemaViolation
                    };
                    first_failure.get_or_insert(reason);
                    label = match reason {
                        FailureReason::NoJson => "no-json".to_string(),
                        _ => "schema-violation".to_string(),
                    };
                }
                _ => {
                    annotations.push(AnnotationRecord {
                        review_id: review.review_id.clone(),
                        worker: outcome
                            .annotation
                            .expect("non-failed outcome has annotation"),
                        status: outcome.status,
                        defects: outcome.defects,
                    });
                    label = "ok".to_string();
                }
            }
        } else {
            first_failure.get_or_insert(FailureReason::BackendError);
            label = status_label(&response);
        }
        worker_statuses.push(WorkerStatus {
            worker_index: response.worker_index,
            seed: response.seed,
            status: label,
        });
        audit.push(AuditRecord {
            review_id: review.review_id.clone(),
            response,
        });
    }

    let failure = if annotations.is_empty() {
        Some(FailureReason::AllWorkersFailed)
    } else {
        first_failure
    }
    .map(|reason| AnnotationFailure {
        review_id: review.review_id.clone(),
        workers: worker_statuses,
        reason,
    });

    ReviewOutcome {
        index,
        audit,
        annotations,
        failure,
    }
}

pub fn run(config: &RunConfig) -> CliResult<()> {
    let paths = OutPaths::new(&config.output_dir);
    require_input(&paths.sampled(), "ingest")?;

    let aspects = config.load_aspects().map_err(CliError::usage)?;
    let template = config.load_template().map_err(CliError::usage)?;
    let example = config.load_example().map_err(CliError::usage)?;
    example.gold_annotation(&aspects).map_err(CliError::usage)?;
    let plan = config.worker_plan();
    let retry = config.backend.config.retry_policy();
    let backend = build_backend(config, &aspects);

    let corpus_file = std::fs::File::open(paths.sampled())
        .with_context(|| format!("cannot open {}", paths.sampled().display()))
        .map_err(CliError::fatal)?;
    let corpus = read_corpus_jsonl(std::io::BufReader::new(corpus_file), "sampled")
        .map_err(CliError::fatal)?;

    let mut done: HashSet<String> = HashSet::new();
    if config.resume {
        if paths.annotations().exists() {
            let existing: Vec<AnnotationRecord> =
                read_jsonl(&paths.annotations()).map_err(CliError::fatal)?;
            done.extend(existing.into_iter().map(|r| r.review_id));
        }
        if paths.failures().exists() {
            let existing: Vec<AnnotationFailure> =
                read_jsonl(&paths.failures()).map_err(CliError::fatal)?;
            done.extend(existing.into_iter().map(|r| r.review_id));
        }
    } else {
        for stale in [paths.audit(), paths.annotations(), paths.failures()] {
            if stale.exists() {
                std::fs::remove_file(&stale)
                    .with_context(|| format!("cannot truncate {}", stale.display()))
                    .map_err(CliError::fatal)?;
            }
        }
    }

    let pending: Vec<(usize, &ReviewRecord)> = corpus
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| !done.contains(&r.review_id))
        .collect();
    let skipped = corpus.len() - pending.len();

    let ctx = AnnotateCtx {
        backend: backend.as_ref(),
        retry,
        plan: &plan,
        aspects: &aspects,
        template: &template,
        example: &example,
        budget: config.context_budget,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::fatal(anyhow::anyhow!("cannot build thread pool: {e}")))?;
    let mut outcomes: Vec<ReviewOutcome> = pool.install(|| {
        pending
            .par_iter()
            .map(|(index, review)| annotate_review(&ctx, *index, review))
            .collect()
    });
    outcomes.sort_by_key(|o| o.index);

    let mut audit = Vec::new();
    let mut annotations = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        audit.extend(outcome.audit);
        annotations.extend(outcome.annotations);
        failures.extend(outcome.failure);
    }

    // Every completion failed at the transport level: the backend is not
    // reachable at all, which is a fatal condition rather than per-review
    // noise.
    let attempted: usize = audit.len();
    let transport_failures = audit
        .iter()
        .filter(|a| a.response.status != ResponseStatus::Ok)
        .count();
    if matches!(config.backend.kind, BackendKind::Http)
        && attempted > 0
        && transport_failures == attempted
    {
        return Err(CliError::fatal(anyhow::anyhow!(
            "backend unreachable: all {attempted} completion requests failed against {}",
            config.backend.config.endpoint
        )));
    }

    // Output files exist even when empty so downstream stages can tell
    // "annotate ran with nothing to write" from "annotate never ran".
    for path in [paths.audit(), paths.annotations(), paths.failures()] {
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(CliError::fatal)?;
    }
    append_jsonl(&paths.audit(), &audit).map_err(CliError::fatal)?;
    append_jsonl(&paths.annotations(), &annotations).map_err(CliError::fatal)?;
    append_jsonl(&paths.failures(), &failures).map_err(CliError::fatal)?;

    let mut manifest = RunManifest::load_or_default(paths.dir()).map_err(CliError::fatal)?;
    manifest.config_hash = sha256_hex(config.canonical_json().as_bytes());
    manifest.prompt_template_hash = sha256_hex(template.text().as_bytes());
    manifest.aspect_set_hash = sha256_hex(aspects.to_json().as_bytes());
    manifest.backend_model = config.backend.config.model.clone();
    manifest
        .record_stage(
            paths.dir(),
            "annotate",
            &[("sampled", paths.sampled().as_path())],
            &[
                ("annotations", paths.annotations().as_path()),
                ("failures", paths.failures().as_path()),
            ],
        )
        .map_err(CliError::fatal)?;

    println!(
        "annotate: {} reviews processed ({} skipped as done), {} worker calls, {} reviews with failures",
        pending.len(),
        skipped,
        attempted,
        failures.len()
    );
    Ok(())
}
