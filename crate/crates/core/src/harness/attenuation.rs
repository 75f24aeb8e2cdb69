//! Largest tolerated attenuation of the planted columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_sd, recover, RecoveryAlgorithm, RecoverySettings};
use crate::countsketch::SketchGeometry;
use crate::data::{generate_design, SyntheticDesign};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttenuationConfig {
    pub p: usize,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// Ascending attenuation levels; the first should be 1.
    pub ladder: Vec<f64>,
    pub settings: RecoverySettings,
    pub base_seed: u64,
}

impl Default for AttenuationConfig {
    fn default() -> Self {
        AttenuationConfig {
            p: 1000,
            n: 100,
            k: 2,
            trials: 100,
            ladder: (0..17).map(|i| 1.0 + 0.25 * i as f64).collect(),
            settings: RecoverySettings::default(),
            base_seed: 2018,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttenuationRow {
    pub trial: usize,
    pub algorithm: &'static str,
    /// Largest ladder level recovered before the first failure.
    pub max_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttenuationSummary {
    pub algorithm: &'static str,
    /// Fraction of trials recovered without attenuation.
    pub accuracy_at_one: f64,
    /// Mean and sd of the max level over trials every algorithm solves at 1.
    pub mean_max_alpha: f64,
    pub sd_max_alpha: f64,
    pub common_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttenuationResult {
    pub rows: Vec<AttenuationRow>,
    pub summary: Vec<AttenuationSummary>,
}

impl AttenuationResult {
    pub fn summary_for(&self, algorithm: &str) -> Option<&AttenuationSummary> {
        self.summary.iter().find(|s| s.algorithm == algorithm)
    }
}

pub fn run_attenuation(config: &AttenuationConfig) -> Result<AttenuationResult> {
    if config.trials == 0 || config.ladder.is_empty() {
        return Err(Error::Config("attenuation needs trials and a ladder".into()));
    }
    if config.ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("attenuation ladder must be increasing".into()));
    }
    let algorithms = [
        RecoveryAlgorithm::Mission(SketchGeometry::identity(config.p)),
        RecoveryAlgorithm::Iht,
    ];
    let per_trial: Vec<Vec<Option<f64>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_seed(config.base_seed, &[trial as u64]);
            algorithms
                .iter()
                .map(|&algo| max_alpha(config, seed, algo))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (trial, levels) in per_trial.iter().enumerate() {
        for (algo, &level) in algorithms.iter().zip(levels) {
            rows.push(AttenuationRow {
                trial,
                algorithm: algo.name(),
                max_alpha: level,
            });
        }
    }
    let common: Vec<&Vec<Option<f64>>> = per_trial
        .iter()
        .filter(|levels| levels.iter().all(Option::is_some))
        .collect();
    let summary = algorithms
        .iter()
        .enumerate()
        .map(|(a, algo)| {
            let solved = per_trial.iter().filter(|l| l[a].is_some()).count();
            let values: Vec<f64> = common.iter().filter_map(|l| l[a]).collect();
            let (mean, sd) = mean_sd(&values);
            AttenuationSummary {
                algorithm: algo.name(),
                accuracy_at_one: solved as f64 / config.trials as f64,
                mean_max_alpha: mean,
                sd_max_alpha: sd,
                common_trials: common.len(),
            }
        })
        .collect();
    Ok(AttenuationResult { rows, summary })
}

/// Walks the ladder upward and stops at the first failure.
fn max_alpha(config: &AttenuationConfig, seed: u64, algo: RecoveryAlgorithm) -> Result<Option<f64>> {
    let mut best = None;
    for &alpha in &config.ladder {
        let mut design = SyntheticDesign::new(config.p, config.n, config.k, seed);
        design.attenuation = alpha;
        let problem = generate_design(&design)?;
        let settings = RecoverySettings {
            sketch_seed: seed,
            ..config.settings
        };
        if recover(&problem, config.k, algo, &settings, false)?.recovered {
            best = Some(alpha);
        } else {
            break;
        }
    }
    Ok(best)
}
