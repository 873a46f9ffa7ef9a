//! `absa vote`: aggregate each review's surviving worker annotations with
//! the two-stage median vote and persist the voted results as JSONL and CSV.

use super::{read_jsonl, require_input, AnnotationRecord, CliError, CliResult, OutPaths};
use crate::config::RunConfig;
use crate::manifest::RunManifest;
use absa::voting::{vote, write_voted_csv, write_voted_jsonl, VotedRecord};
use anyhow::Context;
use std::collections::HashMap;

pub fn run(config: &RunConfig) -> CliResult<()> {
    let paths = OutPaths::new(&config.output_dir);
    require_input(&paths.annotations(), "annotate")?;

    let aspects = config.load_aspects().map_err(CliError::usage)?;
    let records: Vec<AnnotationRecord> =
        read_jsonl(&paths.annotations()).map_err(CliError::fatal)?;

    // Group workers by review, keeping first-seen (corpus) order.
    let mut order: Vec<String> = Vec::new();
    let mut by_review: HashMap<String, Vec<AnnotationRecord>> = HashMap::new();
    for record in records {
        if !by_review.contains_key(&record.review_id) {
            order.push(record.review_id.clone());
        }
        by_review
            .entry(record.review_id.clone())
            .or_default()
            .push(record);
    }

    if order.is_empty() {
        log::warn!("no annotations found; writing empty voted outputs");
    }

    let mut voted_records = Vec::with_capacity(order.len());
    for review_id in order {
        let workers: Vec<_> = by_review
            .remove(&review_id)
            .expect("review id collected above")
            .into_iter()
            .map(|r| r.worker)
            .collect();
        let voted = vote(&workers, &aspects)
            .with_context(|| format!("voting failed for review {review_id}"))
            .map_err(CliError::fatal)?;
        voted_records.push(VotedRecord { review_id, voted });
    }

    let jsonl = std::fs::File::create(paths.voted_jsonl())
        .with_context(|| format!("cannot create {}", paths.voted_jsonl().display()))
        .map_err(CliError::fatal)?;
    write_voted_jsonl(jsonl, &voted_records).map_err(CliError::fatal)?;
    let csv = std::fs::File::create(paths.voted_csv())
        .with_context(|| format!("cannot create {}", paths.voted_csv().display()))
        .map_err(CliError::fatal)?;
    write_voted_csv(csv, &aspects, &voted_records).map_err(CliError::fatal)?;

    let warn_overall_zero = voted_records
        .iter()
        .filter(|r| r.voted.sentiment[aspects.overall_index()] == 0)
        .count();
    if warn_overall_zero > 0 {
        log::warn!(
            "{warn_overall_zero} reviews voted the overall aspect as not mentioned (sentiment 0)"
        );
    }

    let mut manifest = RunManifest::load_or_default(paths.dir()).map_err(CliError::fatal)?;
    manifest
        .record_stage(
            paths.dir(),
            "vote",
            &[("annotations", paths.annotations().as_path())],
            &[
                ("voted_jsonl", paths.voted_jsonl().as_path()),
                ("voted_csv", paths.voted_csv().as_path()),
            ],
        )
        .map_err(CliError::fatal)?;

    println!(
        "vote: {} reviews voted -> {}",
        voted_records.len(),
        paths.voted_jsonl().display()
    );
    Ok(())
}
