//! Success rate over the (n, k) plane at fixed p.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{recover, GammaSchedule, RecoveryAlgorithm, RecoverySettings};
use crate::countsketch::SketchGeometry;
use crate::data::{generate_design, SyntheticDesign};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    pub p: usize,
    pub n_values: Vec<usize>,
    /// Step of the sparsity ratio k/n scanned upward from zero.
    pub rho_step: f64,
    pub trials: usize,
    pub success_threshold: f64,
    pub settings: RecoverySettings,
    pub base_seed: u64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            p: 1000,
            n_values: (1..=10).map(|i| 50 * i).collect(),
            rho_step: 0.02,
            trials: 20,
            success_threshold: 0.5,
            settings: RecoverySettings {
                max_iterations: 3000,
                gamma: Some(GammaSchedule::constant(0.7)),
                ..RecoverySettings::default()
            },
            base_seed: 2018,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub algorithm: &'static str,
    pub n: usize,
    pub k: usize,
    pub delta: f64,
    pub rho: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourPoint {
    pub algorithm: &'static str,
    pub n: usize,
    pub delta: f64,
    /// Interpolated k/n at which the success rate crosses the threshold.
    pub rho: f64,
    /// `true` when the scan never dropped below the threshold.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseResult {
    pub cells: Vec<PhaseCell>,
    pub contours: Vec<ContourPoint>,
}

impl PhaseResult {
    pub fn contour_for(&self, algorithm: &str) -> Vec<&ContourPoint> {
        self.contours.iter().filter(|c| c.algorithm == algorithm).collect()
    }
}

/// k values `round(j * rho_step * n)` for j = 1, 2, ..., deduplicated and
/// capped at min(n, p).
fn k_ladder(n: usize, p: usize, rho_step: f64) -> Vec<usize> {
    let cap = n.min(p);
    let mut out: Vec<usize> = Vec::new();
    let mut j = 1;
    loop {
        let k = (j as f64 * rho_step * n as f64).round() as usize;
        if k > cap {
            break;
        }
        if k > 0 && out.last() != Some(&k) {
            out.push(k);
        }
        j += 1;
    }
    out
}

/// Linear interpolation of the first downward crossing of `threshold`,
/// starting from an implicit `(0, 1.0)` point. Returns `(k, censored)`.
pub fn contour(points: &[(usize, f64)], threshold: f64) -> (f64, bool) {
    let mut prev = (0usize, 1.0f64);
    for &(k, rate) in points {
        if rate < threshold {
            let t = (prev.1 - threshold) / (prev.1 - rate);
            return (prev.0 as f64 + t * (k as f64 - prev.0 as f64), false);
        }
        prev = (k, rate);
    }
    (prev.0 as f64, true)
}

pub fn run_phase_transition(config: &PhaseConfig) -> Result<PhaseResult> {
    if config.trials == 0 || !(config.rho_step > 0.0 && config.rho_step <= 1.0) {
        return Err(Error::Config("phase transition needs trials and 0 < rho_step <= 1".into()));
    }
    if !(config.success_threshold > 0.0 && config.success_threshold < 1.0) {
        return Err(Error::Config("success threshold must lie in (0, 1)".into()));
    }
    let algorithms = [
        RecoveryAlgorithm::Mission(SketchGeometry::identity(config.p)),
        RecoveryAlgorithm::Iht,
    ];
    let jobs: Vec<(RecoveryAlgorithm, usize)> = algorithms
        .iter()
        .flat_map(|&a| config.n_values.iter().map(move |&n| (a, n)))
        .collect();
    let scans: Vec<Vec<PhaseCell>> = jobs
        .par_iter()
        .map(|&(algo, n)| scan(config, algo, n))
        .collect::<Result<_>>()?;

    let mut contours = Vec::new();
    for (&(algo, n), cells) in jobs.iter().zip(&scans) {
        let points: Vec<(usize, f64)> = cells.iter().map(|c| (c.k, c.success_rate)).collect();
        let (k, censored) = contour(&points, config.success_threshold);
        contours.push(ContourPoint {
            algorithm: algo.name(),
            n,
            delta: n as f64 / config.p as f64,
            rho: k / n as f64,
            censored,
        });
    }
    Ok(PhaseResult {
        cells: scans.into_iter().flatten().collect(),
        contours,
    })
}

/// Scans k upward for one (algorithm, n) column until every trial fails.
fn scan(config: &PhaseConfig, algo: RecoveryAlgorithm, n: usize) -> Result<Vec<PhaseCell>> {
    let mut cells = Vec::new();
    for k in k_ladder(n, config.p, config.rho_step) {
        let mut successes = 0;
        for trial in 0..config.trials {
            let seed = derive_seed(config.base_seed, &[n as u64, k as u64, trial as u64]);
            let problem = generate_design(&SyntheticDesign::new(config.p, n, k, seed))?;
            let settings = RecoverySettings {
                sketch_seed: seed,
                ..config.settings
            };
            if recover(&problem, k, algo, &settings, false)?.recovered {
                successes += 1;
            }
        }
        let rate = successes as f64 / config.trials as f64;
        log::debug!("{} n={n} k={k}: {rate}", algo.name());
        cells.push(PhaseCell {
            algorithm: algo.name(),
            n,
            k,
            delta: n as f64 / config.p as f64,
            rho: k as f64 / n as f64,
            success_rate: rate,
        });
        if successes == 0 {
            break;
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_and_contour() {
        assert_eq!(k_ladder(50, 1000, 0.02), (1..=50).collect::<Vec<_>>());
        assert_eq!(k_ladder(10, 1000, 0.25), vec![3, 5, 8, 10]);
        assert_eq!(contour(&[(1, 1.0), (2, 0.6), (3, 0.2)], 0.5), (2.25, false));
        assert_eq!(contour(&[(1, 0.0)], 0.5), (0.5, false));
        assert_eq!(contour(&[(1, 1.0), (2, 0.9)], 0.5), (2.0, true));
    }

    #[test]
    fn overdetermined_column_succeeds() {
        let config = PhaseConfig {
            p: 60,
            n_values: vec![120],
            rho_step: 0.02,
            trials: 5,
            ..PhaseConfig::default()
        };
        let res = run_phase_transition(&config).unwrap();
        for cell in res.cells.iter().filter(|c| c.k <= 5) {
            assert!(cell.success_rate >= 0.95, "{cell:?}");
        }
        assert_eq!(res.contours.len(), 2);
    }
}
