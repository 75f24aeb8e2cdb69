//! Accuracy, ROC AUC, average precision and support recovery.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SparseExample;
use crate::error::{Error, Result};
use crate::model::{predicted_label, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Auc,
    Ap,
    Acc,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Auc => "auc",
            MetricKind::Ap => "ap",
            MetricKind::Acc => "acc",
        }
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auc" => Ok(MetricKind::Auc),
            "ap" => Ok(MetricKind::Ap),
            "acc" | "accuracy" => Ok(MetricKind::Acc),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub metric: MetricKind,
    pub value: f64,
    pub samples: usize,
    /// Positive count for ranking metrics.
    pub positives: Option<usize>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}={}", self.metric.name(), self.value)?;
        write!(f, "samples={}", self.samples)?;
        if let Some(p) = self.positives {
            write!(f, "\npositives={p}")?;
        }
        Ok(())
    }
}

fn is_positive(label: f64) -> bool {
    label > 0.0
}

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, with
/// ties counting one half. Labels `> 0` are positive.
///
/// Computed from tie-averaged ranks: `(R+ - P(P+1)/2) / (P N)`.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let positives = labels.iter().filter(|&&l| is_positive(l)).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels("AUC needs both positive and negative labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (0-based) share the average 1-based rank.
        let avg_rank = (start + end + 1) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&i| is_positive(labels[i])).count();
        rank_sum += avg_rank * tied_pos as f64;
        start = end;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Mean over positives of the precision at each positive's rank. Ranking is
/// by descending score with ties broken by ascending input position.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let positives = labels.iter().filter(|&&l| is_positive(l)).count();
    if positives == 0 {
        return Err(Error::DegenerateLabels("average precision needs a positive label"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if is_positive(labels[i]) {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}

pub fn accuracy(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(predicted.len(), truth.len())?;
    if truth.is_empty() {
        return Err(Error::DegenerateLabels("accuracy of an empty set"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `true` iff every planted id is among the estimated ids.
pub fn support_recovered(estimate: &[u64], truth: &[u64]) -> bool {
    truth.iter().all(|t| estimate.contains(t))
}

/// Scores a model on labelled examples.
pub fn evaluate<M: LinearModel + ?Sized>(
    model: &M,
    examples: &[SparseExample],
    metric: MetricKind,
) -> Result<EvalReport> {
    let labels: Vec<f64> = examples.iter().map(|e| e.label()).collect();
    let scores: Vec<Vec<f64>> = examples.iter().map(|e| model.predict(e)).collect();
    let (value, positives) = match metric {
        MetricKind::Acc => {
            let predicted: Vec<f64> = scores.iter().map(|s| predicted_label(s)).collect();
            (accuracy(&predicted, &labels)?, None)
        }
        MetricKind::Auc | MetricKind::Ap => {
            if model.num_classes() != 1 {
                return Err(Error::Config(format!(
                    "{} needs a single-output model",
                    metric.name()
                )));
            }
            let flat: Vec<f64> = scores.iter().map(|s| s[0]).collect();
            let positives = labels.iter().filter(|&&l| is_positive(l)).count();
            let value = if metric == MetricKind::Auc {
                auc(&flat, &labels)?
            } else {
                average_precision(&flat, &labels)?
            };
            (value, Some(positives))
        }
    };
    Ok(EvalReport {
        metric,
        value,
        samples: examples.len(),
        positives,
    })
}
