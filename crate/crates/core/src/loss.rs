//! Losses and their λ-scaled descent steps.
//!
//! Every loss depends on the example only through its score(s) `s = X·β`, so
//! a descent step is a per-class coefficient times the example's values:
//! `g = coef · X`. [`LossSpec::coefficients`] returns those coefficients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SparseExample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `(y - s)^2`, real labels.
    Squared,
    /// `ln(1 + exp(-y s))`, labels in {-1, +1}.
    Logistic,
    /// `max(0, 1 - y s)`, labels in {-1, +1}.
    Hinge,
    /// Softmax cross-entropy, labels are class ids.
    #[serde(rename = "xent")]
    CrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
            LossKind::Hinge => "hinge",
            LossKind::CrossEntropy => "xent",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "logistic" => Ok(LossKind::Logistic),
            "hinge" => Ok(LossKind::Hinge),
            "xent" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            other => Err(Error::Config(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub learning_rate: f64,
    pub classes: usize,
}

impl LossSpec {
    pub fn new(kind: LossKind, learning_rate: f64, classes: usize) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        match (kind, classes) {
            (LossKind::CrossEntropy, c) if c >= 2 => {}
            (LossKind::CrossEntropy, c) => {
                return Err(Error::Config(format!(
                    "cross-entropy needs at least 2 classes, got {c}"
                )))
            }
            (_, 1) => {}
            (k, c) => {
                return Err(Error::Config(format!(
                    "{k} loss is single-output, got {c} classes"
                )))
            }
        }
        Ok(LossSpec {
            kind,
            learning_rate,
            classes,
        })
    }

    pub fn check_label(&self, label: f64) -> Result<()> {
        let ok = match self.kind {
            LossKind::Squared => label.is_finite(),
            LossKind::Logistic | LossKind::Hinge => label == 1.0 || label == -1.0,
            LossKind::CrossEntropy => {
                label >= 0.0 && label.fract() == 0.0 && label < self.classes as f64
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::LabelDomain {
                label,
                loss: self.kind.name(),
            })
        }
    }

    /// Loss of one example given its scores (one per class).
    pub fn value(&self, scores: &[f64], label: f64) -> Result<f64> {
        self.check_label(label)?;
        Ok(match self.kind {
            LossKind::Squared => (label - scores[0]).powi(2),
            LossKind::Logistic => softplus(-label * scores[0]),
            LossKind::Hinge => (1.0 - label * scores[0]).max(0.0),
            LossKind::CrossEntropy => log_sum_exp(scores) - scores[label as usize],
        })
    }

    /// Per-class descent coefficients: the step for class `c` is
    /// `out[c] * X`. Returns the example's loss.
    pub fn coefficients(&self, scores: &[f64], label: f64, out: &mut Vec<f64>) -> Result<f64> {
        let loss = self.value(scores, label)?;
        let rate = self.learning_rate;
        out.clear();
        match self.kind {
            LossKind::Squared => out.push(2.0 * rate * (label - scores[0])),
            LossKind::Logistic => out.push(rate * label * sigmoid(-label * scores[0])),
            LossKind::Hinge => out.push(if label * scores[0] < 1.0 {
                rate * label
            } else {
                0.0
            }),
            LossKind::CrossEntropy => {
                let norm = log_sum_exp(scores);
                let target = label as usize;
                out.extend(scores.iter().enumerate().map(|(c, &s)| {
                    let indicator = if c == target { 1.0 } else { 0.0 };
                    rate * (indicator - (s - norm).exp())
                }));
            }
        }
        Ok(loss)
    }

    /// Sparse per-class steps for an example.
    pub fn gradient(&self, example: &SparseExample, scores: &[f64]) -> Result<Vec<Vec<(u64, f64)>>> {
        let mut coefs = Vec::with_capacity(scores.len());
        self.coefficients(scores, example.label(), &mut coefs)?;
        Ok(coefs
            .iter()
            .map(|&c| {
                if c == 0.0 {
                    Vec::new()
                } else {
                    example.iter().map(|(i, v)| (i, c * v)).collect()
                }
            })
            .collect())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
