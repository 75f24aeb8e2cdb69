//! Held-out accuracy as a function of sketch width per class relative to k.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mean_sd;
use crate::countsketch::SketchGeometry;
use crate::data::{generate_multiclass, MemorySource, MultiClassDesign};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;
use crate::loss::{LossKind, LossSpec};
use crate::metrics::{evaluate, MetricKind};
use crate::model::{train, MissionConfig, MissionModel, StoppingRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TradeoffConfig {
    pub data: MultiClassDesign,
    /// Fraction of examples used for training; the rest is held out.
    pub train_fraction: f64,
    pub top_k: usize,
    pub depth: usize,
    /// Width-to-k ratios; 1 is always added.
    pub ratios: Vec<f64>,
    pub trials: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub base_seed: u64,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        TradeoffConfig {
            data: MultiClassDesign::default(),
            train_fraction: 0.75,
            top_k: 40,
            depth: 3,
            ratios: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
            trials: 5,
            epochs: 3,
            learning_rate: 0.05,
            base_seed: 2018,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffPoint {
    /// Width divided by k; NaN for the identity reference.
    pub ratio: f64,
    pub width: usize,
    pub identity: bool,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffResult {
    pub points: Vec<TradeoffPoint>,
    pub identity: TradeoffPoint,
}

pub fn run_tradeoff(config: &TradeoffConfig) -> Result<TradeoffResult> {
    if config.trials == 0 || config.top_k == 0 || config.depth == 0 {
        return Err(Error::Config("trade-off needs trials, top_k and depth".into()));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::Config("train fraction must lie in (0, 1)".into()));
    }
    let mut ratios: Vec<f64> = config.ratios.iter().copied().filter(|r| *r > 0.0).collect();
    if !ratios.contains(&1.0) {
        ratios.push(1.0);
    }
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();

    let mut points = Vec::new();
    for &ratio in &ratios {
        let width = ((ratio * config.top_k as f64).round() as usize).max(1);
        let geometry = SketchGeometry::standard(config.depth, width);
        let (mean, sd) = accuracy_over_trials(config, geometry)?;
        points.push(TradeoffPoint {
            ratio,
            width,
            identity: false,
            mean_accuracy: mean,
            sd_accuracy: sd,
        });
    }
    let width = config.data.dimension as usize;
    let (mean, sd) = accuracy_over_trials(config, SketchGeometry::identity(width))?;
    Ok(TradeoffResult {
        points,
        identity: TradeoffPoint {
            ratio: f64::NAN,
            width,
            identity: true,
            mean_accuracy: mean,
            sd_accuracy: sd,
        },
    })
}

fn accuracy_over_trials(config: &TradeoffConfig, geometry: SketchGeometry) -> Result<(f64, f64)> {
    let accs: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(config.base_seed, &[trial as u64]);
            let design = MultiClassDesign {
                seed,
                ..config.data.clone()
            };
            let data = generate_multiclass(&design)?;
            let cut = (data.examples.len() as f64 * config.train_fraction) as usize;
            let (train_set, test_set) = data.examples.split_at(cut);
            let classes = design.classes;
            let loss = LossSpec::new(LossKind::CrossEntropy, config.learning_rate, classes)?;
            let mut model = MissionModel::new(MissionConfig::new(
                classes,
                config.top_k,
                geometry,
                derive_seed(seed, &[1]),
            ))?;
            let source = MemorySource::new(train_set.to_vec()).shuffled(seed);
            train(&mut model, &loss, &source, &StoppingRule::epochs(config.epochs))?;
            Ok(evaluate(&model, test_set, MetricKind::Acc)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(mean_sd(&accs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_contains_ratio_one_and_reaches_identity() {
        let config = TradeoffConfig {
            data: MultiClassDesign {
                examples: 1200,
                dimension: 1024,
                ..MultiClassDesign::default()
            },
            ratios: vec![0.5, 4.0, 256.0],
            trials: 2,
            ..TradeoffConfig::default()
        };
        let res = run_tradeoff(&config).unwrap();
        assert!(res.points.iter().any(|p| p.ratio == 1.0));
        let widest = res.points.last().unwrap();
        let noise = 2.0 * widest.sd_accuracy.max(res.identity.sd_accuracy).max(0.01);
        assert!(
            (widest.mean_accuracy - res.identity.mean_accuracy).abs() <= noise + 0.02,
            "{widest:?} vs {:?}",
            res.identity
        );
        assert!(res.points[0].mean_accuracy < widest.mean_accuracy);
    }
}
