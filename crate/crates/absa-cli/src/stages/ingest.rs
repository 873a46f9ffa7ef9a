//! `absa ingest`: load the review dump, apply tag filters, draw the
//! one-review-per-user sample, and write the sampled corpus plus summary
//! statistics.

use super::{write_json_pretty, write_text, CliError, CliResult, OutPaths};
use crate::config::RunConfig;
use crate::manifest::{sha256_hex, RunManifest};
use absa::ingest::{self, IngestError};
use absa::prompt::WhitespaceCounter;
use absa::report::render_corpus_stats;
use anyhow::Context;

pub fn run(config: &RunConfig) -> CliResult<()> {
    let paths = OutPaths::new(&config.output_dir);
    std::fs::create_dir_all(paths.dir())
        .with_context(|| format!("cannot create {}", paths.dir().display()))
        .map_err(CliError::fatal)?;

    let business_tags = match &config.corpus.business_file {
        Some(path) => Some(ingest::load_business_tags(path).map_err(CliError::fatal)?),
        None => None,
    };
    let (corpus, load_stats) = ingest::load_reviews(
        &config.corpus.reviews_file,
        business_tags.as_ref(),
        &config.tag_filter(),
    )
    .map_err(CliError::fatal)?;

    let sampled = ingest::sample_one_per_user(&corpus, config.sample.n, config.sample.seed)
        .map_err(|err| match err {
            IngestError::InsufficientUsers { .. } | IngestError::EmptyCorpus => {
                CliError::usage(err)
            }
            other => CliError::fatal(other),
        })?;

    let stats = ingest::corpus_stats(&sampled, &WhitespaceCounter).map_err(CliError::fatal)?;

    let sampled_path = paths.sampled();
    let file = std::fs::File::create(&sampled_path)
        .with_context(|| format!("cannot create {}", sampled_path.display()))
        .map_err(CliError::fatal)?;
    ingest::write_corpus_jsonl(file, &sampled).map_err(CliError::fatal)?;
    write_json_pretty(&paths.stats_json(), &stats).map_err(CliError::fatal)?;
    write_text(&paths.stats_txt(), &render_corpus_stats(&stats)).map_err(CliError::fatal)?;

    let mut manifest = RunManifest::load_or_default(paths.dir()).map_err(CliError::fatal)?;
    manifest.config_hash = sha256_hex(config.canonical_json().as_bytes());
    manifest
        .record_stage(
            paths.dir(),
            "ingest",
            &[("reviews", config.corpus.reviews_file.as_path())],
            &[
                ("sampled", sampled_path.as_path()),
                ("corpus_stats", paths.stats_json().as_path()),
            ],
        )
        .map_err(CliError::fatal)?;

    println!(
        "ingest: {} lines read, {} malformed skipped, {} excluded by tags; sampled {} reviews -> {}",
        load_stats.lines,
        load_stats.malformed,
        load_stats.excluded_by_tags,
        sampled.len(),
        sampled_path.display()
    );
    Ok(())
}
