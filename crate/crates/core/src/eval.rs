//! Average precision and mean average precision.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{scores} scores but {labels} relevance labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no relevant items; average precision is undefined")]
    NoRelevant,
    #[error("non-finite score at position {0}")]
    NonFinite(usize),
    #[error("mean of an empty list")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApMode {
    /// Mean of the interpolated precision at recall 0, 0.1, …, 1.0.
    #[default]
    ElevenPoint,
    /// Area under the interpolated precision/recall curve at every recall
    /// change.
    AllPoints,
}

/// Scores and binary relevance for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels {
    pub scores: Vec<f64>,
    pub relevant: Vec<bool>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, relevant: Vec<bool>) -> Result<Self, EvalError> {
        if scores.len() != relevant.len() {
            return Err(EvalError::LengthMismatch {
                scores: scores.len(),
                labels: relevant.len(),
            });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(EvalError::NonFinite(i));
        }
        if !relevant.iter().any(|&r| r) {
            return Err(EvalError::NoRelevant);
        }
        Ok(Self { scores, relevant })
    }
}

/// Precision and recall after each item of the ranking (descending score,
/// ties by original index).
fn pr_curve(data: &ScoredLabels) -> (Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..data.scores.len()).collect();
    order.sort_by(|&a, &b| data.scores[b].total_cmp(&data.scores[a]));
    let total = data.relevant.iter().filter(|&&r| r).count() as f64;
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(order.len());
    let mut recall = Vec::with_capacity(order.len());
    for (rank, &i) in order.iter().enumerate() {
        if data.relevant[i] {
            tp += 1;
        }
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(tp as f64 / total);
    }
    (precision, recall)
}

pub fn average_precision(data: &ScoredLabels, mode: ApMode) -> f64 {
    let (precision, recall) = pr_curve(data);
    match mode {
        ApMode::ElevenPoint => {
            let mut sum = 0.0;
            for t in 0..=10 {
                let r = t as f64 / 10.0;
                let p = precision
                    .iter()
                    .zip(&recall)
                    .filter(|(_, &rc)| rc >= r)
                    .map(|(&p, _)| p)
                    .fold(0.0, f64::max);
                sum += p;
            }
            sum / 11.0
        }
        ApMode::AllPoints => {
            let mut envelope = precision.clone();
            for i in (0..envelope.len().saturating_sub(1)).rev() {
                envelope[i] = envelope[i].max(envelope[i + 1]);
            }
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (i, &r) in recall.iter().enumerate() {
                if r > prev_recall {
                    ap += (r - prev_recall) * envelope[i];
                    prev_recall = r;
                }
            }
            ap
        }
    }
}

pub fn mean_ap(per_class: &[f64]) -> Result<f64, EvalError> {
    if per_class.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}
