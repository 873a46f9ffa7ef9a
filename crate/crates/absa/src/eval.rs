//! Evaluation metrics for annotation quality: concordance rate, Pearson
//! correlation, RMSE, a chance-level baseline, and lift reporting against
//! that baseline.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction and truth lengths differ: {pred} vs {truth}")]
    ShapeMismatch { pred: usize, truth: usize },
    #[error("metric needs at least {min} pairs, got {got}")]
    TooFew { min: usize, got: usize },
    #[error("empty training labels")]
    EmptyTraining,
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("write failed: {0}")]
    Io(#[from] io::Error),
}

fn check_shape(pred: usize, truth: usize, min: usize) -> Result<(), EvalError> {
    if pred != truth {
        return Err(EvalError::ShapeMismatch { pred, truth });
    }
    if pred < min {
        return Err(EvalError::TooFew { min, got: pred });
    }
    Ok(())
}

/// Concordance rate: fraction of exact matches.
pub fn accuracy(pred: &[i64], truth: &[i64]) -> Result<f64, EvalError> {
    check_shape(pred.len(), truth.len(), 1)?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_shape(pred.len(), truth.len(), 1)?;
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Sample Pearson correlation coefficient.
///
/// Returns `None` when either side has zero variance, where the coefficient
/// is undefined; NaN never escapes.
pub fn pearson(pred: &[f64], truth: &[f64]) -> Result<Option<f64>, EvalError> {
    check_shape(pred.len(), truth.len(), 2)?;
    let n = pred.len() as f64;
    let mean_p = pred.iter().sum::<f64>() / n;
    let mean_t = truth.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_p = 0.0;
    let mut var_t = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        let dp = p - mean_p;
        let dt = t - mean_t;
        cov += dp * dt;
        var_p += dp * dp;
        var_t += dt * dt;
    }
    if var_p == 0.0 || var_t == 0.0 {
        return Ok(None);
    }
    Ok(Some(cov / (var_p * var_t).sqrt()))
}

/// Chance-level predictions: `n` seeded draws from the empirical label
/// distribution of the training data.
pub fn chance_baseline(train_labels: &[i64], n: usize, seed: u64) -> Result<Vec<i64>, EvalError> {
    use rand::{Rng, SeedableRng};
    if train_labels.is_empty() {
        return Err(EvalError::EmptyTraining);
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &label in train_labels {
        *counts.entry(label).or_insert(0) += 1;
    }
    let total: u64 = counts.values().sum();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut ticket = rng.random_range(0..total);
        for (&label, &count) in &counts {
            if ticket < count {
                out.push(label);
                break;
            }
            ticket -= count;
        }
    }
    Ok(out)
}

/// Metric summary for one prediction set against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Evaluated pair count (pairs with a present prediction).
    pub n: usize,
    /// Pearson correlation; `None` when undefined (zero variance or n < 2).
    pub corr: Option<f64>,
    pub rmse: f64,
    pub acc: f64,
    /// Pairs excluded because the prediction was absent.
    pub missing: usize,
}

impl EvalReport {
    /// Computes all metrics over the pairs with a present prediction.
    /// Missing predictions are excluded and counted, never imputed.
    pub fn from_pairs(pred: &[Option<i64>], truth: &[i64]) -> Result<Self, EvalError> {
        if pred.len() != truth.len() {
            return Err(EvalError::ShapeMismatch {
                pred: pred.len(),
                truth: truth.len(),
            });
        }
        let mut present_pred = Vec::new();
        let mut present_truth = Vec::new();
        for (p, &t) in pred.iter().zip(truth) {
            if let Some(p) = p {
                present_pred.push(*p);
                present_truth.push(t);
            }
        }
        let missing = pred.len() - present_pred.len();
        if present_pred.is_empty() {
            return Err(EvalError::TooFew { min: 1, got: 0 });
        }
        let pred_f: Vec<f64> = present_pred.iter().map(|&v| v as f64).collect();
        let truth_f: Vec<f64> = present_truth.iter().map(|&v| v as f64).collect();
        let corr = if present_pred.len() >= 2 {
            pearson(&pred_f, &truth_f)?
        } else {
            None
        };
        Ok(EvalReport {
            n: present_pred.len(),
            corr,
            rmse: rmse(&pred_f, &truth_f)?,
            acc: accuracy(&present_pred, &present_truth)?,
            missing,
        })
    }
}

/// One row of the lift table: improvement ratios per metric, `None` where
/// the ratio is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub corr: Option<f64>,
    pub rmse: Option<f64>,
    pub acc: Option<f64>,
}

/// Improvement over the no-voting baseline. Every ratio is oriented so that
/// values above 1 mean improvement: Corr and Acc divide candidate by
/// baseline, RMSE divides baseline by candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub voted: LiftRow,
    pub per_seed_avg: LiftRow,
    pub baseline: LiftRow,
}

/// `num/denom`, with both-zero treated as parity (1.0) and a lone zero
/// denominator as undefined.
fn ratio(num: f64, denom: f64) -> Option<f64> {
    if denom != 0.0 {
        Some(num / denom)
    } else if num == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

fn lift_row(corr: Option<f64>, rmse_val: f64, acc: f64, baseline: &EvalReport) -> LiftRow {
    LiftRow {
        corr: match (corr, baseline.corr) {
            (Some(c), Some(b)) => ratio(c, b),
            _ => None,
        },
        // Inverted ratio: smaller candidate error means a larger lift.
        rmse: ratio(baseline.rmse, rmse_val),
        acc: ratio(acc, baseline.acc),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Lift table over (voted, per-seed average, baseline) rows.
///
/// The per-seed row averages the single-seed metric values first and ratios
/// the average; its correlation cell is undefined if any seed's is.
pub fn lift(voted: &EvalReport, per_seed: &[EvalReport], baseline: &EvalReport) -> LiftReport {
    let per_seed_row = if per_seed.is_empty() {
        LiftRow {
            corr: None,
            rmse: None,
            acc: None,
        }
    } else {
        let corrs: Option<Vec<f64>> = per_seed.iter().map(|r| r.corr).collect();
        let avg_corr = corrs.map(|c| mean(&c));
        let avg_rmse = mean(&per_seed.iter().map(|r| r.rmse).collect::<Vec<_>>());
        let avg_acc = mean(&per_seed.iter().map(|r| r.acc).collect::<Vec<_>>());
        lift_row(avg_corr, avg_rmse, avg_acc, baseline)
    };

    LiftReport {
        voted: lift_row(voted.corr, voted.rmse, voted.acc, baseline),
        per_seed_avg: per_seed_row,
        baseline: lift_row(baseline.corr, baseline.rmse, baseline.acc, baseline),
    }
}

/// One row of the per-review CSV export.
#[derive(Debug, Clone)]
pub struct EvalCsvRow {
    pub review_id: String,
    pub truth: i64,
    pub voted: Option<i64>,
    pub per_seed: Vec<Option<i64>>,
}

/// Writes per-review (truth, voted, per-seed) tuples as CSV. Absent
/// predictions become empty cells.
pub fn write_eval_csv<W: io::Write>(
    out: W,
    seed_labels: &[u64],
    rows: &[EvalCsvRow],
) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["review_id".to_string(), "truth".into(), "voted".into()];
    header.extend(seed_labels.iter().map(|s| format!("seed_{s}")));
    wtr.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.review_id.clone(),
            row.truth.to_string(),
            row.voted.map(|v| v.to_string()).unwrap_or_default(),
        ];
        rec.extend(
            row.per_seed
                .iter()
                .map(|v| v.map(|v| v.to_string()).unwrap_or_default()),
        );
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
