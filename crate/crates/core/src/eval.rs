//! Ranking metrics: AUC, ROC curves, pairwise agreement, and multi-run
//! summaries.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QuestionPair;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric needs both classes: {positives} positive, {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },
    #[error("score at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("no score for question {thread_id}/{post_id}")]
    MissingScore { thread_id: String, post_id: String },
    #[error("no pairs to judge")]
    NoPairs,
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite { index });
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass {
            positives,
            negatives,
        });
    }
    Ok((positives, negatives))
}

/// Probability that a uniformly drawn positive outranks a uniformly drawn
/// negative, ties counting half. Computed from average ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    let (positives, negatives) = check_inputs(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged over the tie group
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            if labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let n_pos = positives as f64;
    let u = rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * negatives as f64))
}

/// ROC points from (0, 0) to (1, 1), one step per distinct score threshold,
/// sweeping from the highest score down.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>, EvalError> {
    let (positives, negatives) = check_inputs(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        i = j;
    }
    Ok(points)
}

/// Area under a piecewise-linear curve by the trapezoid rule.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// AUC plus the ROC curve it summarizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub roc: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self, EvalError> {
        let (positives, negatives) = check_inputs(scores, labels)?;
        Ok(EvalReport {
            auc: auc(scores, labels)?,
            positives,
            negatives,
            roc: roc_curve(scores, labels)?,
        })
    }
}

/// Key for looking up a model score for one question.
pub type QuestionKey = (String, String);

pub fn question_key(thread_id: &str, post_id: &str) -> QuestionKey {
    (thread_id.to_string(), post_id.to_string())
}

/// Fraction of pairs where the answered member scores strictly higher, ties
/// counting half.
pub fn pairwise_agreement(
    scores: &HashMap<QuestionKey, f64>,
    pairs: &[QuestionPair],
) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPairs);
    }
    let mut credit = 0.0;
    for p in pairs {
        let lookup = |r: &crate::corpus::QuestionRecord| {
            scores
                .get(&question_key(&r.thread_id, &r.post_id))
                .copied()
                .ok_or_else(|| EvalError::MissingScore {
                    thread_id: r.thread_id.clone(),
                    post_id: r.post_id.clone(),
                })
        };
        let sa = lookup(&p.answered)?;
        let su = lookup(&p.unanswered)?;
        if sa > su {
            credit += 1.0;
        } else if sa == su {
            credit += 0.5;
        }
    }
    Ok(credit / pairs.len() as f64)
}

/// Mean, minimum, and maximum over repeated runs of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub aucs: Vec<f64>,
}

impl RunSummary {
    pub fn new(aucs: Vec<f64>) -> Self {
        assert!(!aucs.is_empty(), "a summary needs at least one run");
        RunSummary { aucs }
    }

    pub fn mean(&self) -> f64 {
        self.aucs.iter().sum::<f64>() / self.aucs.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.aucs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.aucs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Writes an ROC curve as `fpr,tpr` rows.
pub fn write_roc_csv(
    points: &[(f64, f64)],
    path: impl AsRef<std::path::Path>,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fpr", "tpr"])?;
    for (fpr, tpr) in points {
        w.write_record([format!("{fpr}"), format!("{tpr}")])?;
    }
    w.flush()?;
    Ok(())
}
