//! `absa evaluate`: score the voted annotations (and each single seed)
//! against the ground-truth stars, build the chance-level baseline, and
//! report metric lifts.

use super::{
    read_jsonl, require_input, write_json_pretty, write_text, AnnotationRecord, CliError,
    CliResult, OutPaths,
};
use crate::config::RunConfig;
use crate::manifest::RunManifest;
use absa::eval::{chance_baseline, lift, write_eval_csv, EvalCsvRow, EvalReport, LiftReport};
use absa::ingest::read_corpus_jsonl;
use absa::report::{render_eval_reports, render_lift_table};
use absa::voting::VotedRecord;
use anyhow::Context;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub voted: EvalReport,
    pub per_seed: Vec<SeedReport>,
    pub baseline: EvalReport,
    pub lift: LiftReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub report: EvalReport,
}

pub fn run(config: &RunConfig) -> CliResult<()> {
    let paths = OutPaths::new(&config.output_dir);
    require_input(&paths.sampled(), "ingest")?;
    require_input(&paths.voted_jsonl(), "vote")?;
    require_input(&paths.annotations(), "annotate")?;

    let aspects = config.load_aspects().map_err(CliError::usage)?;
    let overall = aspects.overall_index();

    let corpus_file = std::fs::File::open(paths.sampled())
        .with_context(|| format!("cannot open {}", paths.sampled().display()))
        .map_err(CliError::fatal)?;
    let corpus = read_corpus_jsonl(std::io::BufReader::new(corpus_file), "sampled")
        .map_err(CliError::fatal)?;

    let voted: Vec<VotedRecord> = read_jsonl(&paths.voted_jsonl()).map_err(CliError::fatal)?;
    let voted_by_id: HashMap<&str, &VotedRecord> =
        voted.iter().map(|r| (r.review_id.as_str(), r)).collect();

    let annotations: Vec<AnnotationRecord> =
        read_jsonl(&paths.annotations()).map_err(CliError::fatal)?;
    // (review, seed) -> that worker's overall value.
    let mut seed_preds: HashMap<(&str, u64), i64> = HashMap::new();
    for record in &annotations {
        seed_preds.insert(
            (record.review_id.as_str(), record.worker.seed),
            i64::from(record.worker.values[overall].get()),
        );
    }

    let truth: Vec<i64> = corpus.records.iter().map(|r| i64::from(r.stars)).collect();
    let voted_preds: Vec<Option<i64>> = corpus
        .records
        .iter()
        .map(|r| {
            voted_by_id
                .get(r.review_id.as_str())
                .map(|v| i64::from(v.voted.sentiment[overall]))
        })
        .collect();

    let zero_overall = voted_preds.iter().flatten().filter(|&&p| p == 0).count();
    if zero_overall > 0 {
        log::warn!(
            "{zero_overall} voted predictions rate the overall aspect as not mentioned; they score as 0"
        );
    }

    let voted_report = EvalReport::from_pairs(&voted_preds, &truth).map_err(CliError::usage)?;

    let seeds = config.worker_plan().seeds().to_vec();
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let preds: Vec<Option<i64>> = corpus
            .records
            .iter()
            .map(|r| seed_preds.get(&(r.review_id.as_str(), seed)).copied())
            .collect();
        let report = EvalReport::from_pairs(&preds, &truth).map_err(CliError::usage)?;
        per_seed.push(SeedReport { seed, report });
    }

    let baseline_draws =
        chance_baseline(&truth, truth.len(), config.eval.baseline_seed).map_err(CliError::usage)?;
    let baseline_preds: Vec<Option<i64>> = baseline_draws.iter().map(|&v| Some(v)).collect();
    let baseline_report =
        EvalReport::from_pairs(&baseline_preds, &truth).map_err(CliError::usage)?;

    let seed_reports: Vec<EvalReport> = per_seed.iter().map(|s| s.report.clone()).collect();
    let lift_report = lift(&voted_report, &seed_reports, &baseline_report);

    let artifact = EvalArtifact {
        voted: voted_report,
        per_seed,
        baseline: baseline_report,
        lift: lift_report,
    };
    write_json_pretty(&paths.eval_json(), &artifact).map_err(CliError::fatal)?;

    let mut rows = vec![("voted".to_string(), artifact.voted.clone())];
    for seed_report in &artifact.per_seed {
        rows.push((
            format!("seed {}", seed_report.seed),
            seed_report.report.clone(),
        ));
    }
    rows.push(("chance baseline".into(), artifact.baseline.clone()));
    let text = format!(
        "{}\n{}",
        render_eval_reports(&rows),
        render_lift_table(&artifact.lift)
    );
    write_text(&paths.eval_txt(), &text).map_err(CliError::fatal)?;

    let csv_rows: Vec<EvalCsvRow> = corpus
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| EvalCsvRow {
            review_id: r.review_id.clone(),
            truth: truth[i],
            voted: voted_preds[i],
            per_seed: seeds
                .iter()
                .map(|&seed| seed_preds.get(&(r.review_id.as_str(), seed)).copied())
                .collect(),
        })
        .collect();
    let csv = std::fs::File::create(paths.eval_csv())
        .with_context(|| format!("cannot create {}", paths.eval_csv().display()))
        .map_err(CliError::fatal)?;
    write_eval_csv(csv, &seeds, &csv_rows).map_err(CliError::fatal)?;

    let mut manifest = RunManifest::load_or_default(paths.dir()).map_err(CliError::fatal)?;
    manifest
        .record_stage(
            paths.dir(),
            "evaluate",
            &[
                ("sampled", paths.sampled().as_path()),
                ("voted_jsonl", paths.voted_jsonl().as_path()),
                ("annotations", paths.annotations().as_path()),
            ],
            &[
                ("eval_report", paths.eval_json().as_path()),
                ("eval_pairs", paths.eval_csv().as_path()),
            ],
        )
        .map_err(CliError::fatal)?;

    println!(
        "evaluate: n={} missing={} -> {}",
        artifact.voted.n,
        artifact.voted.missing,
        paths.eval_json().display()
    );
    Ok(())
}
