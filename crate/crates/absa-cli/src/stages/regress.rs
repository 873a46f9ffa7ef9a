//! `absa regress`: fit the two GLMs — actual stars and voted overall rating,
//! each on the aspect sentiments — with BIC-selected support, and compare
//! their coefficients.

use super::{
    read_jsonl, require_input, write_json_pretty, write_text, CliError, CliResult, OutPaths,
};
use crate::config::{RunConfig, Y2Mode};
use crate::manifest::RunManifest;
use absa::ingest::read_corpus_jsonl;
use absa::regress::{
    bic_select, compare_coefficients, fit_glm, CoefComparison, DesignMatrix, RegressionFit,
    SelectionMode,
};
use absa::report::render_comparison;
use absa::voting::VotedRecord;
use anyhow::Context;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Serialize, Deserialize)]
pub struct RegressArtifact {
    pub y1: RegressionFit,
    pub y2: RegressionFit,
    pub diff: CoefComparison,
    pub selection_mode: SelectionMode,
    pub y2_mode: Y2Mode,
    pub rows_used: usize,
    pub dropped_missing: usize,
    pub dropped_zero_overall: usize,
    pub dropped_constant_columns: Vec<String>,
}

pub fn run(config: &RunConfig) -> CliResult<()> {
    let paths = OutPaths::new(&config.output_dir);
    require_input(&paths.sampled(), "ingest")?;
    require_input(&paths.voted_jsonl(), "vote")?;

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

    // Rows: reviews with a voted annotation whose overall sentiment is
    // present; both models share the same rows so their coefficients are
    // comparable.
    let mut dropped_missing = 0usize;
    let mut dropped_zero_overall = 0usize;
    let mut y1 = Vec::new();
    let mut y2 = Vec::new();
    let mut rows: Vec<&VotedRecord> = Vec::new();
    for record in &corpus.records {
        match voted_by_id.get(record.review_id.as_str()) {
            None => dropped_missing += 1,
            Some(v) => {
                if v.voted.sentiment[overall] == 0 {
                    dropped_zero_overall += 1;
                } else {
                    rows.push(v);
                    y1.push(f64::from(record.stars));
                    y2.push(f64::from(v.voted.sentiment[overall]));
                }
            }
        }
    }
    if dropped_missing + dropped_zero_overall > 0 {
        log::warn!(
            "regress: dropped {dropped_missing} reviews without voted annotations and {dropped_zero_overall} with an unmentioned overall rating"
        );
    }

    // Predictor columns: every aspect except the overall one; constant
    // columns carry no signal and are removed before selection.
    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut dropped_constant = Vec::new();
    for (k, aspect) in aspects.aspects().iter().enumerate() {
        if k == overall {
            continue;
        }
        let col: Vec<f64> = rows
            .iter()
            .map(|v| f64::from(v.voted.sentiment[k]))
            .collect();
        if col.windows(2).all(|w| w[0] == w[1]) {
            log::warn!(
                "regress: aspect {:?} is constant across rows; dropped from the design",
                aspect.name
            );
            dropped_constant.push(aspect.name.clone());
            continue;
        }
        names.push(aspect.name.clone());
        cols.push(col);
    }

    let design_y1 =
        DesignMatrix::new(names.clone(), cols.clone(), y1, true).map_err(CliError::usage)?;
    let design_y2 = DesignMatrix::new(names.clone(), cols, y2, true).map_err(CliError::usage)?;

    let selection = bic_select(&design_y1, &names).map_err(CliError::usage)?;
    let y1_fit = selection.best;

    let y2_fit = match config.regress.y2_mode {
        Y2Mode::ReuseSupport => {
            let subset = design_y2
                .select(&y1_fit.selected)
                .map_err(CliError::usage)?;
            fit_glm(&subset).map_err(CliError::usage)?
        }
        Y2Mode::Reselect => {
            bic_select(&design_y2, &names)
                .map_err(CliError::usage)?
                .best
        }
    };

    let diff = compare_coefficients(&y1_fit, &y2_fit).map_err(CliError::usage)?;

    let artifact = RegressArtifact {
        y1: y1_fit,
        y2: y2_fit,
        diff,
        selection_mode: selection.mode,
        y2_mode: config.regress.y2_mode,
        rows_used: rows.len(),
        dropped_missing,
        dropped_zero_overall,
        dropped_constant_columns: dropped_constant,
    };
    write_json_pretty(&paths.regress_json(), &artifact).map_err(CliError::fatal)?;
    let text = render_comparison(
        "actual rating (Y1)",
        &artifact.y1,
        "voted overall rating (Y2)",
        &artifact.y2,
        &artifact.diff,
    );
    write_text(&paths.regress_txt(), &text).map_err(CliError::fatal)?;

    let mut manifest = RunManifest::load_or_default(paths.dir()).map_err(CliError::fatal)?;
    manifest
        .record_stage(
            paths.dir(),
            "regress",
            &[
                ("sampled", paths.sampled().as_path()),
                ("voted_jsonl", paths.voted_jsonl().as_path()),
            ],
            &[("regress_report", paths.regress_json().as_path())],
        )
        .map_err(CliError::fatal)?;

    println!(
        "regress: {} rows, selected {:?} -> {}",
        artifact.rows_used,
        artifact.y1.selected,
        paths.regress_json().display()
    );
    Ok(())
}
