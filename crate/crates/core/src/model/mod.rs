//! Sparse linear models and their trainers.
//!
//! All learners share one SGD step: score the example with the active
//! weights, turn the loss into per-class descent coefficients, and hand the
//! sparse step `coef * X` to the learner's [`Learner::apply_gradient`]. The
//! learners differ only in how they absorb that step.

mod batch_iht;
mod feature_hash;
mod iht;
pub mod io;
mod mission;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use batch_iht::BatchIhtModel;
pub use feature_hash::{bucket_of, buckets_for, FeatureHashModel};
pub use iht::IhtModel;
pub use io::{read_model, write_model, ModelHeader, SavedModel};
pub use mission::{MissionConfig, MissionModel};
pub use train::{train, train_sharded, train_with, EpochStats, StoppingRule, TrainReport};

use crate::data::SparseExample;
use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::topk::sort_by_magnitude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Mission,
    Iht,
    BatchIht,
    Fh,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mission => "mission",
            Algorithm::Iht => "iht",
            Algorithm::BatchIht => "batch-iht",
            Algorithm::Fh => "fh",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mission" => Ok(Algorithm::Mission),
            "iht" => Ok(Algorithm::Iht),
            "batch-iht" => Ok(Algorithm::BatchIht),
            "fh" => Ok(Algorithm::Fh),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Read access to a (possibly multi-class) linear model.
pub trait LinearModel {
    fn num_classes(&self) -> usize;

    /// Active weight of feature `id` for `class`; zero when inactive.
    fn weight(&self, class: usize, id: u64) -> f64;

    /// Nonzero active entries of one class, descending `|weight|`.
    fn active(&self, class: usize) -> Vec<(u64, f64)>;

    fn scores_into(&self, example: &SparseExample, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.num_classes()).map(|c| example.dot_with(|i| self.weight(c, i))));
    }

    /// One score per class.
    fn predict(&self, example: &SparseExample) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_classes());
        self.scores_into(example, &mut out);
        out
    }
}

/// A model that can take SGD steps.
pub trait Learner: LinearModel {
    /// Absorbs a descent step for one class. Entries have distinct ids.
    fn apply_gradient(&mut self, class: usize, gradient: &[(u64, f64)]) -> Result<()>;

    /// Called after every pass over the data.
    fn end_epoch(&mut self) -> Result<()> {
        Ok(())
    }

    /// One SGD step. Returns the example's loss before the update.
    fn step(&mut self, loss: &LossSpec, example: &SparseExample) -> Result<f64> {
        if loss.classes != self.num_classes() {
            return Err(Error::Config(format!(
                "loss expects {} classes, model has {}",
                loss.classes,
                self.num_classes()
            )));
        }
        let scores = self.predict(example);
        let mut coefs = Vec::with_capacity(scores.len());
        let value = loss.coefficients(&scores, example.label(), &mut coefs)?;
        let mut step = Vec::with_capacity(example.len());
        for (class, &coef) in coefs.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            step.clear();
            step.extend(
                example
                    .iter()
                    .map(|(i, v)| (i, coef * v))
                    .filter(|&(_, g)| g != 0.0),
            );
            if !step.is_empty() {
                self.apply_gradient(class, &step)?;
            }
        }
        Ok(value)
    }
}

/// Predicted label: the sign of the score for single-output models (ties go
/// to +1), otherwise the arg-max class (ties go to the lower class).
pub fn predicted_label(scores: &[f64]) -> f64 {
    match scores {
        [s] => {
            if *s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        _ => {
            let mut best = 0;
            for (c, s) in scores.iter().enumerate() {
                if *s > scores[best] {
                    best = c;
                }
            }
            best as f64
        }
    }
}

/// Keeps the `k` largest-magnitude entries (ties by ascending id) and
/// returns them sorted by id. Zero entries are dropped.
pub fn hard_threshold(v: &[(u64, f64)], k: usize) -> Vec<(u64, f64)> {
    let mut entries: Vec<(u64, f64)> = v.iter().copied().filter(|e| e.1 != 0.0).collect();
    sort_by_magnitude(&mut entries);
    entries.truncate(k);
    entries.sort_by_key(|e| e.0);
    entries
}

/// Dense form of [`hard_threshold`].
pub fn hard_threshold_dense(v: &[f64], k: usize) -> Vec<f64> {
    let sparse: Vec<(u64, f64)> = v.iter().enumerate().map(|(i, &x)| (i as u64, x)).collect();
    let mut out = vec![0.0; v.len()];
    for (i, x) in hard_threshold(&sparse, k) {
        out[i as usize] = x;
    }
    out
}
