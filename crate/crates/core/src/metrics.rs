//! Evaluation metrics derived from diff results and token sequences: the
//! normalized symbol edit distance, token-level SER, and per-group error
//! percentages.

use std::collections::BTreeMap;

use crate::diff::DiffResult;
use crate::model::{report_group, ReportGroup};

/// A ratio kept as exact integers alongside its floating-point view.
/// The degenerate 0/0 case is defined as 0 (two empty scores match).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricValue {
    pub numerator: u64,
    pub denominator: u64,
}

impl MetricValue {
    pub fn new(numerator: u64, denominator: u64) -> MetricValue {
        MetricValue {
            numerator,
            denominator,
        }
    }

    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }

    /// Percentage with one decimal, rounded half up.
    pub fn percent(&self) -> f64 {
        round1(self.value() * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("SER is undefined for an empty reference token sequence")]
    EmptyReference,
}

/// Normalized edit distance: (I + D) / (N1 + N2). Always within [0, 1].
pub fn omr_ned(d: &DiffResult) -> MetricValue {
    MetricValue::new(d.insertions + d.deletions, d.n_pred + d.n_ref)
}

/// Symbol error rate: Levenshtein distance (insertions, deletions and
/// substitutions at unit cost) from prediction to reference, normalized by
/// the reference length. May exceed 1.
pub fn ser(ref_tokens: &[String], pred_tokens: &[String]) -> Result<MetricValue, MetricsError> {
    if ref_tokens.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let distance = levenshtein(ref_tokens, pred_tokens);
    Ok(MetricValue::new(distance, ref_tokens.len() as u64))
}

/// Standard Levenshtein distance over token slices.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> u64 {
    if a.is_empty() {
        return b.len() as u64;
    }
    if b.is_empty() {
        return a.len() as u64;
    }
    let mut prev: Vec<u64> = (0..=b.len() as u64).collect();
    let mut cur = vec![0u64; b.len() + 1];
    for (i, xa) in a.iter().enumerate() {
        cur[0] = i as u64 + 1;
        for (j, xb) in b.iter().enumerate() {
            let sub = prev[j] + (xa != xb) as u64;
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Share of the total edit distance per report group, in percent rounded to
/// one decimal. All six groups are present; an empty diff yields zeros.
pub fn category_percentages(d: &DiffResult) -> BTreeMap<ReportGroup, f64> {
    let total = d.total_edits();
    let mut sums: BTreeMap<ReportGroup, u64> = ReportGroup::ALL.iter().map(|g| (*g, 0)).collect();
    for (cat, count) in d.per_category.iter_nonzero() {
        *sums.get_mut(&report_group(cat)).unwrap() += count;
    }
    sums.into_iter()
        .map(|(g, n)| {
            let pct = if total == 0 {
                0.0
            } else {
                round1(100.0 * n as f64 / total as f64)
            };
            (g, pct)
        })
        .collect()
}
