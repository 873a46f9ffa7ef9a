//! Gaussian identity-link GLM fitting with exhaustive BIC subset selection
//! and cross-model coefficient comparison.
//!
//! The family is Gaussian with identity link, so the fit is ordinary least
//! squares solved through the normal equations. The Gaussian log-likelihood
//! uses the MLE variance, AIC/BIC count one parameter per coefficient term,
//! and pseudo-R-squared is one minus the deviance ratio (which equals the
//! usual R-squared under this family).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum RegressError {
    #[error("design invalid: {0}")]
    InvalidDesign(String),
    #[error("singular design, dependent columns: {0:?}")]
    SingularDesign(Vec<String>),
    #[error("insufficient data: n={n} must exceed p={p}")]
    InsufficientData { n: usize, p: usize },
    #[error("unknown candidate column {0:?}")]
    UnknownColumn(String),
    #[error("candidate column {0:?} is constant")]
    ConstantColumn(String),
    #[error("fits share no terms to compare")]
    EmptyComparison,
}

/// Predictor columns plus the response vector.
///
/// Columns are stored column-major under their names; the intercept is a
/// flag rather than a materialized column.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    intercept: bool,
}

impl DesignMatrix {
    pub fn new(
        names: Vec<String>,
        cols: Vec<Vec<f64>>,
        y: Vec<f64>,
        intercept: bool,
    ) -> Result<Self, RegressError> {
        if names.len() != cols.len() {
            return Err(RegressError::InvalidDesign(format!(
                "{} names for {} columns",
                names.len(),
                cols.len()
            )));
        }
        if y.is_empty() {
            return Err(RegressError::InvalidDesign("empty response".into()));
        }
        for (name, col) in names.iter().zip(&cols) {
            if col.len() != y.len() {
                return Err(RegressError::InvalidDesign(format!(
                    "column {:?} has {} rows, response has {}",
                    name,
                    col.len(),
                    y.len()
                )));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(RegressError::InvalidDesign(format!(
                    "duplicate column name {name:?}"
                )));
            }
        }
        Ok(Self {
            names,
            cols,
            y,
            intercept,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.cols[i].as_slice())
    }

    /// A new design keeping only the named columns (same response).
    pub fn select(&self, keep: &[String]) -> Result<Self, RegressError> {
        let mut names = Vec::with_capacity(keep.len());
        let mut cols = Vec::with_capacity(keep.len());
        for name in keep {
            let i = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| RegressError::UnknownColumn(name.clone()))?;
            names.push(name.clone());
            cols.push(self.cols[i].clone());
        }
        Self::new(names, cols, self.y.clone(), self.intercept)
    }
}

/// One fitted term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermFit {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Full fit summary, including the information criteria used for selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Intercept first (when present), then predictors in design order.
    pub terms: Vec<TermFit>,
    pub pseudo_r2: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    /// Predictor column names in the model, excluding the intercept.
    pub selected: Vec<String>,
}

impl RegressionFit {
    /// Builds a fit holding only coefficient terms, for comparing against
    /// published coefficient tables. The likelihood-based fields are not
    /// meaningful and are set to NaN.
    pub fn from_coef_table(terms: &[(&str, f64, f64)], n: usize) -> Self {
        let terms: Vec<TermFit> = terms
            .iter()
            .map(|&(name, coef, se)| {
                let z = if se != 0.0 { coef / se } else { 0.0 };
                TermFit {
                    name: name.to_string(),
                    coef,
                    se,
                    z,
                    p_value: two_sided_p(z),
                }
            })
            .collect();
        let selected = terms
            .iter()
            .filter(|t| t.name != "intercept")
            .map(|t| t.name.clone())
            .collect();
        RegressionFit {
            terms,
            pseudo_r2: f64::NAN,
            log_likelihood: f64::NAN,
            aic: f64::NAN,
            bic: f64::NAN,
            n,
            selected,
        }
    }

    pub fn term(&self, name: &str) -> Option<&TermFit> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Per-term t statistics for the difference between two fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefComparison {
    pub terms: Vec<CoefDiff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefDiff {
    pub name: String,
    pub t: f64,
}

// ---------------------------------------------------------------------------
// Dense symmetric solve (LDL^T), sized for p <= a few dozen.
// ---------------------------------------------------------------------------

struct Ldlt {
    lower: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

/// Factorizes a symmetric positive definite matrix. Pivots that collapse
/// relative to the original diagonal mark linearly dependent columns; the
/// indices of every such column are returned as the error.
fn ldlt(g: &[Vec<f64>]) -> Result<Ldlt, Vec<usize>> {
    let p = g.len();
    let mut lower = vec![vec![0.0; p]; p];
    let mut diag = vec![0.0; p];
    let mut dependent = Vec::new();
    let scale = g
        .iter()
        .enumerate()
        .map(|(j, row)| row[j].abs())
        .fold(0.0f64, f64::max)
        .max(1.0);

    for j in 0..p {
        let mut d = g[j][j];
        for k in 0..j {
            d -= lower[j][k] * lower[j][k] * diag[k];
        }
        if d <= 1e-10 * scale {
            dependent.push(j);
            diag[j] = 0.0;
            continue;
        }
        diag[j] = d;
        lower[j][j] = 1.0;
        for i in (j + 1)..p {
            let mut v = g[i][j];
            for k in 0..j {
                v -= lower[i][k] * lower[j][k] * diag[k];
            }
            lower[i][j] = v / d;
        }
    }
    if dependent.is_empty() {
        Ok(Ldlt { lower, diag })
    } else {
        Err(dependent)
    }
}

impl Ldlt {
    #[allow(clippy::needless_range_loop)]
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = b.len();
        // Forward: L z = b
        let mut z = b.to_vec();
        for i in 0..p {
            for k in 0..i {
                z[i] -= self.lower[i][k] * z[k];
            }
        }
        // Scale: D w = z
        for i in 0..p {
            z[i] /= self.diag[i];
        }
        // Backward: L^T x = w
        for i in (0..p).rev() {
            for k in (i + 1)..p {
                z[i] -= self.lower[k][i] * z[k];
            }
        }
        z
    }

    fn inverse(&self) -> Vec<Vec<f64>> {
        let p = self.diag.len();
        let mut inv = vec![vec![0.0; p]; p];
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..p {
                inv[i][j] = col[i];
            }
        }
        inv
    }
}

// ---------------------------------------------------------------------------
// Normal CDF for z-value p-values (rational erf approximation, |err| < 2e-7).
// ---------------------------------------------------------------------------

fn erf_approx(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf_approx(z / std::f64::consts::SQRT_2))
}

fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * (1.0 - normal_cdf(z.abs()))).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Cross products needed for any subset fit: the Gram matrix of
/// [intercept | columns], X^T y, y^T y, and the response mean.
struct Gram {
    g: Vec<Vec<f64>>,
    xty: Vec<f64>,
    yty: f64,
    y_mean: f64,
    n: usize,
}

#[allow(clippy::needless_range_loop)]
fn build_gram(design: &DesignMatrix, col_indices: &[usize]) -> Gram {
    let n = design.n();
    let with_icpt = design.intercept;
    let p = col_indices.len() + usize::from(with_icpt);

    // Materialize column views: index 0 is the implicit intercept.
    let col_at = |j: usize| -> Option<&[f64]> {
        if with_icpt && j == 0 {
            None
        } else {
            let idx = col_indices[j - usize::from(with_icpt)];
            Some(design.cols[idx].as_slice())
        }
    };

    let mut g = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for a in 0..p {
        for b in a..p {
            let dot = match (col_at(a), col_at(b)) {
                (None, None) => n as f64,
                (None, Some(cb)) => cb.iter().sum(),
                (Some(ca), None) => ca.iter().sum(),
                (Some(ca), Some(cb)) => ca.iter().zip(cb).map(|(x, y)| x * y).sum(),
            };
            g[a][b] = dot;
            g[b][a] = dot;
        }
        xty[a] = match col_at(a) {
            None => design.y.iter().sum(),
            Some(ca) => ca.iter().zip(&design.y).map(|(x, y)| x * y).sum(),
        };
    }
    let yty = design.y.iter().map(|y| y * y).sum();
    let y_mean = design.y.iter().sum::<f64>() / n as f64;
    Gram {
        g,
        xty,
        yty,
        y_mean,
        n,
    }
}

/// Gaussian log-likelihood at the MLE variance, plus AIC/BIC for `p` terms.
fn gaussian_criteria(rss: f64, n: usize, p: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let sigma2 = rss / nf;
    let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let aic = -2.0 * loglik + 2.0 * p as f64;
    let bic = -2.0 * loglik + (p as f64) * nf.ln();
    (loglik, aic, bic)
}

fn term_names(design: &DesignMatrix, col_indices: &[usize]) -> Vec<String> {
    let mut out = Vec::with_capacity(col_indices.len() + 1);
    if design.intercept {
        out.push("intercept".to_string());
    }
    out.extend(col_indices.iter().map(|&i| design.names[i].clone()));
    out
}

fn fit_indices(
    design: &DesignMatrix,
    col_indices: &[usize],
) -> Result<RegressionFit, RegressError> {
    let n = design.n();
    let p = col_indices.len() + usize::from(design.intercept);
    if p == 0 {
        return Err(RegressError::InvalidDesign(
            "model has no terms (no intercept, no columns)".into(),
        ));
    }
    if n <= p {
        return Err(RegressError::InsufficientData { n, p });
    }

    let gram = build_gram(design, col_indices);
    let names = term_names(design, col_indices);
    let factor = ldlt(&gram.g).map_err(|dep| {
        RegressError::SingularDesign(dep.into_iter().map(|j| names[j].clone()).collect())
    })?;
    let beta = factor.solve(&gram.xty);

    // Residual sum of squares computed directly against the data rows, so the
    // orthogonality invariant holds at machine precision.
    let mut rss = 0.0;
    for row in 0..n {
        let mut fitted = 0.0;
        let mut j = 0;
        if design.intercept {
            fitted += beta[0];
            j = 1;
        }
        for (slot, &ci) in col_indices.iter().enumerate() {
            fitted += beta[j + slot] * design.cols[ci][row];
        }
        let r = design.y[row] - fitted;
        rss += r * r;
    }

    let tss: f64 = design
        .y
        .iter()
        .map(|y| (y - gram.y_mean) * (y - gram.y_mean))
        .sum();
    let pseudo_r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    let (loglik, aic, bic) = gaussian_criteria(rss, n, p);

    // SEs from the scaled inverse Gram matrix.
    let s2 = rss / (n - p) as f64;
    let inv = factor.inverse();
    let terms = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = (s2 * inv[j][j]).max(0.0).sqrt();
            let z = if se > 0.0 {
                beta[j] / se
            } else if beta[j] == 0.0 {
                0.0
            } else {
                f64::INFINITY * beta[j].signum()
            };
            TermFit {
                name: name.clone(),
                coef: beta[j],
                se,
                z,
                p_value: two_sided_p(z),
            }
        })
        .collect();

    Ok(RegressionFit {
        terms,
        pseudo_r2,
        log_likelihood: loglik,
        aic,
        bic,
        n,
        selected: col_indices
            .iter()
            .map(|&i| design.names[i].clone())
            .collect(),
    })
}

/// Fits the Gaussian identity-link GLM on all columns of the design.
pub fn fit_glm(design: &DesignMatrix) -> Result<RegressionFit, RegressError> {
    let all: Vec<usize> = (0..design.cols.len()).collect();
    fit_indices(design, &all)
}

/// BIC score of one subset, computed from precomputed cross products. Much
/// cheaper than a full fit: O(p^3) instead of O(n p^2) per subset.
fn subset_bic(full: &Gram, subset: &[usize], intercept: bool) -> Option<(f64, f64)> {
    let idx: Vec<usize> = if intercept {
        std::iter::once(0)
            .chain(subset.iter().map(|&j| j + 1))
            .collect()
    } else {
        subset.to_vec()
    };
    let p = idx.len();
    let mut g = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (a, &ia) in idx.iter().enumerate() {
        for (b, &ib) in idx.iter().enumerate() {
            g[a][b] = full.g[ia][ib];
        }
        xty[a] = full.xty[ia];
    }
    let factor = ldlt(&g).ok()?;
    let beta = factor.solve(&xty);
    let explained: f64 = beta.iter().zip(&xty).map(|(b, x)| b * x).sum();
    let rss = (full.yty - explained).max(0.0);
    let (_, _, bic) = gaussian_criteria(rss, full.n, p);
    Some((bic, rss))
}

/// Score of one enumerated subset, retained so callers can audit the search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetScore {
    pub columns: Vec<String>,
    pub bic: f64,
}

/// How the winning subset was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    Exhaustive,
    Stepwise,
}

/// Result of BIC model selection: the refitted best model plus the full
/// score table (exhaustive mode only).
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub best: RegressionFit,
    pub scores: Vec<SubsetScore>,
    pub mode: SelectionMode,
}

const EXHAUSTIVE_LIMIT: usize = 16;

/// Selects the predictor subset minimizing BIC. The intercept is always
/// included. Up to 16 candidates all `2^m` subsets are fitted; beyond that
/// the search falls back to forward-backward stepwise with a logged notice.
///
/// Ties break toward fewer terms, then lexicographic column order.
pub fn bic_select(
    design: &DesignMatrix,
    candidates: &[String],
) -> Result<SelectionResult, RegressError> {
    if !design.intercept {
        return Err(RegressError::InvalidDesign(
            "selection requires an intercept".into(),
        ));
    }
    let mut cand_idx = Vec::with_capacity(candidates.len());
    for name in candidates {
        let i = design
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| RegressError::UnknownColumn(name.clone()))?;
        let col = &design.cols[i];
        if col.iter().all(|&v| v == col[0]) {
            return Err(RegressError::ConstantColumn(name.clone()));
        }
        cand_idx.push(i);
    }

    if candidates.len() <= EXHAUSTIVE_LIMIT {
        exhaustive_select(design, &cand_idx)
    } else {
        log::warn!(
            "{} candidates exceed the exhaustive limit of {}; falling back to stepwise selection",
            candidates.len(),
            EXHAUSTIVE_LIMIT
        );
        stepwise_select(design, &cand_idx)
    }
}

/// Deterministic preference order for equal-BIC subsets.
fn better_subset(a: &(f64, Vec<String>), b: &(f64, Vec<String>)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(&b.1))
}

fn exhaustive_select(
    design: &DesignMatrix,
    cand_idx: &[usize],
) -> Result<SelectionResult, RegressError> {
    let m = cand_idx.len();
    // Gram over [intercept | candidates], reused by every subset.
    let full = build_gram(design, cand_idx);

    let scored: Vec<(u32, Option<f64>)> = (0u32..(1 << m))
        .into_par_iter()
        .map(|mask| {
            let subset: Vec<usize> = (0..m).filter(|&j| mask >> j & 1 == 1).collect();
            let bic = subset_bic(&full, &subset, true).map(|(bic, _)| bic);
            (mask, bic)
        })
        .collect();

    let mut scores = Vec::with_capacity(scored.len());
    let mut best: Option<(f64, Vec<String>, u32)> = None;
    for (mask, bic) in scored {
        let names: Vec<String> = (0..m)
            .filter(|&j| mask >> j & 1 == 1)
            .map(|j| design.names[cand_idx[j]].clone())
            .collect();
        let Some(bic) = bic else { continue };
        scores.push(SubsetScore {
            columns: names.clone(),
            bic,
        });
        let mut sorted_names = names;
        sorted_names.sort();
        let entry = (bic, sorted_names, mask);
        let replace = match &best {
            None => true,
            Some((b_bic, b_names, _)) => {
                better_subset(&(entry.0, entry.1.clone()), &(*b_bic, b_names.clone()))
                    == std::cmp::Ordering::Less
            }
        };
        if replace {
            best = Some(entry);
        }
    }

    let (_, _, mask) = best
        .ok_or_else(|| RegressError::InvalidDesign("no subset produced a well-posed fit".into()))?;
    let winners: Vec<usize> = (0..m)
        .filter(|&j| mask >> j & 1 == 1)
        .map(|j| cand_idx[j])
        .collect();
    // Refit the winner directly against the data rows so the returned fit
    // carries exact residual-based statistics.
    let fit = fit_indices(design, &winners)?;
    Ok(SelectionResult {
        best: fit,
        scores,
        mode: SelectionMode::Exhaustive,
    })
}

fn stepwise_select(
    design: &DesignMatrix,
    cand_idx: &[usize],
) -> Result<SelectionResult, RegressError> {
    let full = build_gram(design, cand_idx);
    let m = cand_idx.len();
    let bic_of = |included: &[usize]| subset_bic(&full, included, true).map(|(bic, _)| bic);

    let mut included: Vec<usize> = Vec::new();
    let mut current = bic_of(&included)
        .ok_or_else(|| RegressError::InvalidDesign("intercept-only fit failed".into()))?;

    loop {
        let mut best_move: Option<(f64, Vec<usize>)> = None;
        // Forward: try adding each excluded candidate.
        for j in 0..m {
            if included.contains(&j) {
                continue;
            }
            let mut trial = included.clone();
            trial.push(j);
            trial.sort_unstable();
            if let Some(bic) = bic_of(&trial) {
                if bic < current && best_move.as_ref().is_none_or(|(b, _)| bic < *b) {
                    best_move = Some((bic, trial));
                }
            }
        }
        // Backward: try dropping each included candidate.
        for (pos, _) in included.iter().enumerate() {
            let mut trial = included.clone();
            trial.remove(pos);
            if let Some(bic) = bic_of(&trial) {
                if bic < current && best_move.as_ref().is_none_or(|(b, _)| bic < *b) {
                    best_move = Some((bic, trial));
                }
            }
        }
        match best_move {
            Some((bic, trial)) => {
                current = bic;
                included = trial;
            }
            None => break,
        }
    }

    let winners: Vec<usize> = included.iter().map(|&j| cand_idx[j]).collect();
    let fit = fit_indices(design, &winners)?;
    Ok(SelectionResult {
        best: fit,
        scores: Vec::new(),
        mode: SelectionMode::Stepwise,
    })
}

/// Per shared term, the t statistic of the coefficient difference:
/// `(coef_a - coef_b) / sqrt(se_a^2 + se_b^2)`.
pub fn compare_coefficients(
    fit_a: &RegressionFit,
    fit_b: &RegressionFit,
) -> Result<CoefComparison, RegressError> {
    let mut terms = Vec::new();
    for ta in &fit_a.terms {
        if let Some(tb) = fit_b.term(&ta.name) {
            let denom = (ta.se * ta.se + tb.se * tb.se).sqrt();
            let diff = ta.coef - tb.coef;
            let t = if denom > 0.0 {
                diff / denom
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY * diff.signum()
            };
            terms.push(CoefDiff {
                name: ta.name.clone(),
                t,
            });
        }
    }
    if terms.is_empty() {
        return Err(RegressError::EmptyComparison);
    }
    Ok(CoefComparison { terms })
}
