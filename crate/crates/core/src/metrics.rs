//! Ranking and threshold metrics for binary fraud scores.
//!
//! Tie policy: AUC gives half credit to tied positive/negative pairs, AP
//! treats a run of equal scores as a single step, and Rec@K keeps the
//! original order among equal scores.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Fraud scores paired with binary labels (`true` = fraud).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                actual: labels.len(),
            });
        }
        if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite { row: pos, col: 0 });
        }
        Ok(ScoredLabels { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn num_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn num_negative(&self) -> usize {
        self.len() - self.num_positive()
    }
}

/// Indices sorted by descending score; equal scores keep their original order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Fraction of all positives found among the `k` highest scores.
pub fn recall_at_k(s: &ScoredLabels, k: usize) -> Result<f64> {
    let pos = s.num_positive();
    if pos == 0 {
        return Err(Error::UndefinedMetric("recall@k needs at least one positive"));
    }
    if k == 0 || k > s.len() {
        return Err(Error::InvalidConfig(alloc::format!("k = {k} outside 1..={}", s.len())));
    }
    let hits = descending_order(&s.scores)
        .into_iter()
        .take(k)
        .filter(|&i| s.labels[i])
        .count();
    Ok(hits as f64 / pos as f64)
}

/// F1 of the predictions `score >= threshold`; 0 when precision and recall
/// are both 0.
pub fn f1_score(s: &ScoredLabels, threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&score, &label) in s.scores.iter().zip(&s.labels) {
        match (score >= threshold, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Twice the Mann-Whitney win count (ties count one), computed by sweeping
/// tie groups in ascending score order.
fn doubled_wins(scores: &[f64], labels: &[bool]) -> u64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut neg_below: u64 = 0;
    let mut total: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let (mut pos_g, mut neg_g) = (0u64, 0u64);
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            if labels[order[end]] {
                pos_g += 1;
            } else {
                neg_g += 1;
            }
            end += 1;
        }
        total += 2 * pos_g * neg_below + pos_g * neg_g;
        neg_below += neg_g;
        start = end;
    }
    total
}

/// Probability a random positive outscores a random negative, ties counting 1/2.
pub fn auc(s: &ScoredLabels) -> Result<f64> {
    let pos = s.num_positive() as u64;
    let neg = s.num_negative() as u64;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes"));
    }
    Ok(doubled_wins(&s.scores, &s.labels) as f64 / (2 * pos * neg) as f64)
}

/// `sum_n (R_n - R_{n-1}) P_n` over the descending-score sweep, one step per
/// group of equal scores.
pub fn average_precision(s: &ScoredLabels) -> Result<f64> {
    if s.num_positive() == 0 {
        return Err(Error::UndefinedMetric("AP needs at least one positive"));
    }
    Ok(average_precision_raw(&s.scores, &s.labels))
}

/// [`average_precision`] without validation; returns 0 when there are no positives.
pub(crate) fn average_precision_raw(scores: &[f64], labels: &[bool]) -> f64 {
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return 0.0;
    }
    let order = descending_order(scores);
    let mut ap = 0.0;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        let mut tp_group = 0usize;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            if labels[order[end]] {
                tp_group += 1;
            }
            end += 1;
        }
        tp += tp_group;
        seen += end - start;
        if tp_group > 0 {
            ap += ap_step(tp_group, total_pos, tp, seen);
        }
        start = end;
    }
    ap
}

/// One AP step: recall gained times precision at the end of the step.
#[inline]
pub fn ap_step(tp_gained: usize, total_pos: usize, tp_cum: usize, seen_cum: usize) -> f64 {
    (tp_gained as f64 / total_pos as f64) * (tp_cum as f64 / seen_cum as f64)
}

/// The metrics block written for one run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub rec_at_k: f64,
    pub f1: f64,
    pub auc: f64,
    pub ap: f64,
    pub k: usize,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub seed: u64,
}

/// Evaluates all four metrics. `rec_k` defaults to the number of positives.
pub fn evaluate(s: &ScoredLabels, rec_k: Option<usize>, threshold: f64, seed: u64) -> Result<MetricsReport> {
    let n_pos = s.num_positive();
    let k = rec_k.unwrap_or(n_pos).min(s.len());
    Ok(MetricsReport {
        rec_at_k: recall_at_k(s, k)?,
        f1: f1_score(s, threshold),
        auc: auc(s)?,
        ap: average_precision(s)?,
        k,
        threshold,
        n_pos,
        n_neg: s.num_negative(),
        seed,
    })
}
