//! `absa report`: render every artifact present in the run directory into
//! one human-readable summary.

use super::{read_jsonl, write_text, CliError, CliResult, OutPaths};
use crate::config::RunConfig;
use crate::stages::evaluate::EvalArtifact;
use crate::stages::regress::RegressArtifact;
use absa::inference::AuditRecord;
use absa::ingest::CorpusStats;
use absa::report::{
    render_comparison, render_corpus_stats, render_eval_reports, render_lift_table,
};
use anyhow::Context;
use std::collections::BTreeMap;

/// Mean and standard deviation of per-review wall time spent in the backend
/// (summed worker latencies), from the audit log.
fn timing_summary(records: &[AuditRecord]) -> Option<(f64, f64, usize)> {
    if records.is_empty() {
        return None;
    }
    let mut per_review: BTreeMap<&str, f64> = BTreeMap::new();
    for record in records {
        *per_review.entry(record.review_id.as_str()).or_insert(0.0) +=
            record.response.latency_ms as f64 / 1000.0;
    }
    let times: Vec<f64> = per_review.values().copied().collect();
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt(), per_review.len()))
}

pub fn run(config: &RunConfig) -> CliResult<()> {
    let paths = OutPaths::new(&config.output_dir);
    let mut sections: Vec<String> = Vec::new();

    if paths.stats_json().exists() {
        let text = std::fs::read_to_string(paths.stats_json())
            .context("reading corpus stats")
            .map_err(CliError::fatal)?;
        let stats: CorpusStats = serde_json::from_str(&text)
            .context("corpus stats corrupt")
            .map_err(CliError::fatal)?;
        sections.push(render_corpus_stats(&stats));
    }

    if paths.audit().exists() {
        let audit: Vec<AuditRecord> = read_jsonl(&paths.audit()).map_err(CliError::fatal)?;
        if let Some((mean, std, reviews)) = timing_summary(&audit) {
            sections.push(format!(
                "Annotation timing over {reviews} reviews: {mean:.3} +/- {std:.3} s per review (summed worker latencies)\n"
            ));
        }
    }

    if paths.eval_json().exists() {
        let text = std::fs::read_to_string(paths.eval_json())
            .context("reading eval report")
            .map_err(CliError::fatal)?;
        let artifact: EvalArtifact = serde_json::from_str(&text)
            .context("eval report corrupt")
            .map_err(CliError::fatal)?;
        let mut rows = vec![("voted".to_string(), artifact.voted.clone())];
        for seed_report in &artifact.per_seed {
            rows.push((
                format!("seed {}", seed_report.seed),
                seed_report.report.clone(),
            ));
        }
        rows.push(("chance baseline".into(), artifact.baseline.clone()));
        sections.push(render_eval_reports(&rows));
        sections.push(render_lift_table(&artifact.lift));
    }

    if paths.regress_json().exists() {
        let text = std::fs::read_to_string(paths.regress_json())
            .context("reading regression report")
            .map_err(CliError::fatal)?;
        let artifact: RegressArtifact = serde_json::from_str(&text)
            .context("regression report corrupt")
            .map_err(CliError::fatal)?;
        sections.push(format!(
            "Regression rows used: {} ({} missing, {} with unmentioned overall dropped)\n",
            artifact.rows_used, artifact.dropped_missing, artifact.dropped_zero_overall
        ));
        sections.push(render_comparison(
            "actual rating (Y1)",
            &artifact.y1,
            "voted overall rating (Y2)",
            &artifact.y2,
            &artifact.diff,
        ));
    }

    if sections.is_empty() {
        return Err(CliError::usage(anyhow::anyhow!(
            "no artifacts found in {}; run the pipeline stages first",
            paths.dir().display()
        )));
    }

    let report = sections.join("\n");
    write_text(&paths.report_txt(), &report).map_err(CliError::fatal)?;
    println!("{report}");
    println!("report written to {}", paths.report_txt().display());
    Ok(())
}
