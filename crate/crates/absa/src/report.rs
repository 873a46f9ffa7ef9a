//! Human-readable rendering of pipeline artifacts: corpus statistics,
//! metric and lift tables, and regression summaries.

use crate::eval::{EvalReport, LiftReport, LiftRow};
use crate::ingest::CorpusStats;
use crate::regress::{CoefComparison, RegressionFit};

fn num(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.3}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".into())
}

fn sig_marker(p: f64) -> &'static str {
    if p < 0.001 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let render_row = |cells: &[String]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<width$}", width = widths[i])
                } else {
                    format!("{c:>width$}", width = widths[i])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    out.push_str(&render_row(&header_cells));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    out
}

pub fn render_corpus_stats(stats: &CorpusStats) -> String {
    let rows = vec![
        vec![
            "characters".to_string(),
            num(stats.chars.mean),
            num(stats.chars.std),
            num(stats.chars.min),
            num(stats.chars.max),
        ],
        vec![
            "tokens".to_string(),
            num(stats.tokens.mean),
            num(stats.tokens.std),
            num(stats.tokens.min),
            num(stats.tokens.max),
        ],
        vec![
            "stars".to_string(),
            num(stats.stars.mean),
            num(stats.stars.std),
            num(stats.stars.min),
            num(stats.stars.max),
        ],
    ];
    format!(
        "Corpus summary (n = {})\n{}",
        stats.n,
        table(&["quantity", "mean", "std", "min", "max"], &rows)
    )
}

/// Metric table with one labelled row per prediction source.
pub fn render_eval_reports(rows: &[(String, EvalReport)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, r)| {
            vec![
                label.clone(),
                opt(r.corr),
                num(r.rmse),
                num(r.acc),
                r.n.to_string(),
                r.missing.to_string(),
            ]
        })
        .collect();
    table(
        &["predictions", "corr", "rmse", "acc", "n", "missing"],
        &body,
    )
}

pub fn render_lift_table(lift: &LiftReport) -> String {
    let row = |label: &str, r: &LiftRow| -> Vec<String> {
        vec![label.to_string(), opt(r.corr), opt(r.rmse), opt(r.acc)]
    };
    let body = vec![
        row("voting employed", &lift.voted),
        row("per-seed average", &lift.per_seed_avg),
        row("baseline (no voting)", &lift.baseline),
    ];
    format!(
        "{}Ratios above 1.000 mean improvement over the baseline; the RMSE\nratio is inverted (baseline / candidate) so that also reads upward.\n",
        table(&["majority voting", "corr", "rmse", "acc"], &body)
    )
}

pub fn render_fit(title: &str, fit: &RegressionFit) -> String {
    let body: Vec<Vec<String>> = fit
        .terms
        .iter()
        .map(|t| {
            vec![
                t.name.clone(),
                num(t.coef),
                format!("({})", num(t.se)),
                num(t.z),
                sig_marker(t.p_value).to_string(),
            ]
        })
        .collect();
    format!(
        "{title} (n = {})\n{}pseudo-R2 {}   AIC {}   BIC {}\n(* p<0.05, ** p<0.001)\n",
        fit.n,
        table(&["term", "coef", "(SE)", "z", "sig"], &body),
        num(fit.pseudo_r2),
        num(fit.aic),
        num(fit.bic),
    )
}

/// Side-by-side fit comparison with the per-term difference t values.
pub fn render_comparison(
    label_a: &str,
    fit_a: &RegressionFit,
    label_b: &str,
    fit_b: &RegressionFit,
    diff: &CoefComparison,
) -> String {
    let mut body = Vec::new();
    for term_a in &fit_a.terms {
        let Some(term_b) = fit_b.term(&term_a.name) else {
            continue;
        };
        let t = diff
            .terms
            .iter()
            .find(|d| d.name == term_a.name)
            .map(|d| num(d.t))
            .unwrap_or_else(|| "-".into());
        body.push(vec![
            term_a.name.clone(),
            num(term_a.coef),
            format!("({})", num(term_a.se)),
            num(term_a.z),
            sig_marker(term_a.p_value).to_string(),
            num(term_b.coef),
            format!("({})", num(term_b.se)),
            num(term_b.z),
            sig_marker(term_b.p_value).to_string(),
            t,
        ]);
    }
    let headers = [
        "term", "coef", "(SE)", "z", "sig", "coef", "(SE)", "z", "sig", "diff t",
    ];
    let mut out = format!("{label_a} (left) vs {label_b} (right)\n");
    out.push_str(&table(&headers, &body));
    out.push_str(&format!(
        "left : pseudo-R2 {}   AIC {}   BIC {}\nright: pseudo-R2 {}   AIC {}   BIC {}\n(* p<0.05, ** p<0.001)\n",
        num(fit_a.pseudo_r2),
        num(fit_a.aic),
        num(fit_a.bic),
        num(fit_b.pseudo_r2),
        num(fit_b.aic),
        num(fit_b.bic),
    ));
    out
}
