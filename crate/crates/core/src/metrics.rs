//! Validity and reliability statistics: Pearson correlation with a two-tailed
//! t-test, significance stars, MAE, Cronbach's alpha, weighted kappa,
//! test-retest agreement and IQR outlier fences.
//!
//! All variances use the sample (n - 1) denominator.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::{Inventory, ResponseSheet};
use crate::special::student_t_two_tailed;
use crate::traits::Domain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("runs do not cover the same sessions: {0}")]
    CoverageMismatch(String),
}

/// Significance marker for a two-tailed p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "")]
    None,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "***")]
    Three,
}

impl Stars {
    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `***` for p < 0.001, `**` for p < 0.01, `*` for p < 0.05; strict inequalities.
pub fn assign_stars(p: f64) -> Stars {
    if p < 0.001 {
        Stars::Three
    } else if p < 0.01 {
        Stars::Two
    } else if p < 0.05 {
        Stars::One
    } else {
        Stars::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
    pub stars: Stars,
}

fn mean(xs: &[f64]) -> f64 {
    // Shifted by the first element so identical inputs give an exact mean.
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

/// Pearson's r with a two-tailed t-test on `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(MetricsError::DegenerateInput("pearson needs at least 3 pairs"));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::DegenerateInput("zero variance"));
    }
    let r = (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    let p_value = correlation_p_value(r, n);
    Ok(CorrelationResult { r, p_value, n, stars: assign_stars(p_value) })
}

/// Two-tailed p for correlation `r` over `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * libm::sqrt(df / denom);
    student_t_two_tailed(t, df)
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    libm::sqrt(sample_variance(xs))
}

/// Arithmetic mean; `None` for an empty slice.
pub fn mean_of(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(mean(xs))
    }
}

/// Cronbach's alpha over a respondents × items matrix (rows are respondents).
pub fn cronbach_alpha(matrix: &[Vec<f64>]) -> Result<f64, MetricsError> {
    let n = matrix.len();
    if n < 2 {
        return Err(MetricsError::DegenerateInput("alpha needs at least 2 respondents"));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(MetricsError::DegenerateInput("alpha needs at least 2 items"));
    }
    if let Some(row) = matrix.iter().find(|r| r.len() != k) {
        return Err(MetricsError::LengthMismatch { left: k, right: row.len() });
    }
    let item_var_sum: f64 = (0..k)
        .map(|j| {
            let col: Vec<f64> = matrix.iter().map(|r| r[j]).collect();
            sample_variance(&col)
        })
        .sum();
    let totals: Vec<f64> = matrix.iter().map(|r| r.iter().sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var <= 0.0 {
        return Err(MetricsError::DegenerateInput("total score variance is zero"));
    }
    let kf = k as f64;
    Ok(kf / (kf - 1.0) * (1.0 - item_var_sum / total_var))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaWeighting {
    /// Disagreement weight `|i - j| / 4`.
    #[default]
    Linear,
    /// Disagreement weight 1 off the diagonal.
    Unweighted,
}

impl KappaWeighting {
    fn weight(self, i: usize, j: usize) -> f64 {
        match self {
            KappaWeighting::Linear => (i as f64 - j as f64).abs() / 4.0,
            KappaWeighting::Unweighted => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// Weighted kappa between two administrations of 1–5 ratings.
///
/// When the expected weighted disagreement is zero (both runs constant on
/// the same category) the result is 1.0 by convention.
pub fn weighted_kappa(run_a: &[u8], run_b: &[u8], weighting: KappaWeighting) -> Result<f64, MetricsError> {
    if run_a.len() != run_b.len() {
        return Err(MetricsError::LengthMismatch { left: run_a.len(), right: run_b.len() });
    }
    if run_a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let cat = |v: u8| -> Result<usize, MetricsError> {
        if (1..=5).contains(&v) {
            Ok(usize::from(v - 1))
        } else {
            Err(MetricsError::DegenerateInput("rating outside 1..=5"))
        }
    };
    let n = run_a.len() as f64;
    let mut observed = [[0u32; 5]; 5];
    let mut row = [0u32; 5];
    let mut col = [0u32; 5];
    for (&a, &b) in run_a.iter().zip(run_b) {
        let (i, j) = (cat(a)?, cat(b)?);
        observed[i][j] += 1;
        row[i] += 1;
        col[j] += 1;
    }
    let (mut wo, mut we) = (0.0, 0.0);
    for i in 0..5 {
        for j in 0..5 {
            let w = weighting.weight(i, j);
            wo += w * f64::from(observed[i][j]) / n;
            we += w * (f64::from(row[i]) / n) * (f64::from(col[j]) / n);
        }
    }
    if we == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - wo / we)
}

/// Test-retest agreement per domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa_per_domain: [f64; 5],
    pub kappa_avg: f64,
}

/// Weighted kappa averaged over all unordered run pairs and over each
/// domain's items. For each item the answers of every session are
/// concatenated into one rating vector; sessions that skipped the item in
/// either run of a pair are left out of that pair's vector.
///
/// Each run maps session id to that session's response sheet.
pub fn test_retest(
    runs: &[BTreeMap<String, ResponseSheet>],
    inventory: &Inventory,
    weighting: KappaWeighting,
) -> Result<KappaReport, MetricsError> {
    if runs.len() < 2 {
        return Err(MetricsError::TooFewValues { needed: 2, got: runs.len() });
    }
    let first: Vec<&String> = runs[0].keys().collect();
    for (t, run) in runs.iter().enumerate().skip(1) {
        if run.keys().collect::<Vec<_>>() != first {
            return Err(MetricsError::CoverageMismatch(alloc::format!("run {t} differs from run 0")));
        }
    }
    let mut per_domain = [0.0; 5];
    for domain in Domain::ALL {
        let mut kappas = Vec::new();
        for item in inventory.domain_items(domain) {
            for a in 0..runs.len() {
                for b in (a + 1)..runs.len() {
                    let mut va = Vec::new();
                    let mut vb = Vec::new();
                    for sid in &first {
                        let pa = runs[a][*sid].get(item.index);
                        let pb = runs[b][*sid].get(item.index);
                        if let (Some(x), Some(y)) = (pa, pb) {
                            va.push(x.value());
                            vb.push(y.value());
                        }
                    }
                    if !va.is_empty() {
                        kappas.push(weighted_kappa(&va, &vb, weighting)?);
                    }
                }
            }
        }
        per_domain[domain.index()] =
            mean_of(&kappas).ok_or(MetricsError::DegenerateInput("no overlapping item answers"))?;
    }
    let kappa_avg = mean(&per_domain);
    Ok(KappaReport { kappa_per_domain: per_domain, kappa_avg })
}

/// Internal consistency plus test-retest agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub cronbach_alpha: f64,
    pub kappa_per_domain: [f64; 5],
    pub kappa_avg: f64,
}

/// Per-try PCC rows with their column means and sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TryTable {
    /// One row per try: five dimension values followed by their average.
    pub rows: Vec<[f64; 6]>,
    pub mean: [f64; 6],
    pub std: [f64; 6],
}

/// Builds a try table from per-try dimension values; the sixth column is the
/// row average.
pub fn try_table(per_try: &[[f64; 5]]) -> Result<TryTable, MetricsError> {
    if per_try.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let rows: Vec<[f64; 6]> = per_try
        .iter()
        .map(|r| {
            let mut out = [0.0; 6];
            out[..5].copy_from_slice(r);
            out[5] = mean(r);
            out
        })
        .collect();
    let mut m = [0.0; 6];
    let mut s = [0.0; 6];
    for c in 0..6 {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        m[c] = mean(&col);
        s[c] = sample_std(&col);
    }
    Ok(TryTable { rows, mean: m, std: s })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub outlier_indices: Vec<usize>,
}

/// Quantile by linear interpolation between closest ranks, `p(k) = (k - 1) / (n - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Flags values strictly outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`.
pub fn iqr_outliers(values: &[f64]) -> Result<OutlierReport, MetricsError> {
    if values.len() < 4 {
        return Err(MetricsError::TooFewValues { needed: 4, got: values.len() });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower_fence = q1 - 1.5 * iqr;
    let upper_fence = q3 + 1.5 * iqr;
    let outlier_indices = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < lower_fence || **v > upper_fence)
        .map(|(i, _)| i)
        .collect();
    Ok(OutlierReport { q1, q3, iqr, lower_fence, upper_fence, outlier_indices })
}
