//! Per-iteration estimation error of full-gradient MISSION.

use serde::{Deserialize, Serialize};

use super::{recover, GammaSchedule, GradientMode, RecoveryAlgorithm, RecoverySettings};
use crate::countsketch::SketchGeometry;
use crate::data::{generate_design, DesignScale, SyntheticDesign};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub noise_sd: f64,
    pub iterations: usize,
    /// Sketch per run; `None` is the identity sketch over p.
    pub sketch: Option<SketchGeometry>,
    pub gamma: Option<GammaSchedule>,
    pub step_scale: f64,
    pub scale: DesignScale,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            n: 400,
            p: 1000,
            k: 5,
            noise_sd: 0.1,
            iterations: 200,
            sketch: None,
            gamma: Some(GammaSchedule::default()),
            step_scale: 0.5,
            scale: DesignScale::Unit,
            seed: 2018,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceResult {
    /// `||beta_t - beta*||_2`, starting with the zero initial point.
    pub errors: Vec<f64>,
    /// Mean ratio of successive errors while the error is above twice the
    /// plateau.
    pub decay_ratio: f64,
    pub decay_iterations: usize,
    /// Median error over the last quarter of the run.
    pub plateau: f64,
    /// The error doubled on five consecutive iterations.
    pub diverged: bool,
}

pub fn run_convergence(config: &ConvergenceConfig) -> Result<ConvergenceResult> {
    if config.iterations == 0 {
        return Err(Error::Config("convergence needs at least one iteration".into()));
    }
    let mut design = SyntheticDesign::new(config.p, config.n, config.k, config.seed);
    design.noise_sd = config.noise_sd;
    design.scale = config.scale;
    let problem = generate_design(&design)?;
    let geometry = config.sketch.unwrap_or(SketchGeometry::identity(config.p));
    let settings = RecoverySettings {
        max_iterations: config.iterations,
        stable_iterations: usize::MAX,
        gamma: config.gamma,
        mode: GradientMode::Full,
        step_scale: config.step_scale,
        sketch_seed: config.seed,
    };
    let outcome = recover(&problem, config.k, RecoveryAlgorithm::Mission(geometry), &settings, true)?;
    let initial = problem.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut errors = Vec::with_capacity(outcome.errors.len() + 1);
    errors.push(initial);
    errors.extend(outcome.errors);
    Ok(summarize(errors))
}

fn summarize(errors: Vec<f64>) -> ConvergenceResult {
    let tail_start = errors.len() - errors.len().div_ceil(4);
    let mut tail: Vec<f64> = errors[tail_start..].to_vec();
    tail.sort_by(f64::total_cmp);
    let plateau = if tail.len() % 2 == 1 {
        tail[tail.len() / 2]
    } else {
        (tail[tail.len() / 2 - 1] + tail[tail.len() / 2]) / 2.0
    };
    let mut ratios = Vec::new();
    for w in errors.windows(2) {
        if w[0] <= 2.0 * plateau || w[0] == 0.0 {
            break;
        }
        ratios.push(w[1] / w[0]);
    }
    let decay_ratio = if ratios.is_empty() {
        f64::NAN
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    let mut run = 0;
    let mut diverged = false;
    for w in errors.windows(2) {
        if w[1] >= 2.0 * w[0] && w[1] > 0.0 {
            run += 1;
            diverged |= run >= 5;
        } else {
            run = 0;
        }
    }
    ConvergenceResult {
        decay_iterations: ratios.len(),
        errors,
        decay_ratio,
        plateau,
        diverged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_support_noiseless_is_gradient_descent() {
        let config = ConvergenceConfig {
            n: 100,
            p: 20,
            k: 20,
            noise_sd: 0.0,
            iterations: 400,
            ..ConvergenceConfig::default()
        };
        let res = run_convergence(&config).unwrap();
        assert!(res.errors.last().unwrap() < &1e-8, "{:?}", res.errors.last());
        assert!(res.decay_ratio < 1.0);
        assert!(!res.diverged);
    }

    #[test]
    fn summary_detects_divergence() {
        let errors: Vec<f64> = (0..10).map(|i| 2f64.powi(i)).collect();
        assert!(summarize(errors).diverged);
        let res = summarize(vec![8.0, 4.0, 2.0, 1.0, 0.1, 0.1, 0.1, 0.1]);
        assert_eq!(res.plateau, 0.1);
        assert_eq!(res.decay_ratio, (0.5 + 0.5 + 0.5 + 0.1) / 4.0);
        assert!(!res.diverged);
    }

    #[test]
    fn sketch_floor_not_below_identity_floor() {
        let base = ConvergenceConfig {
            n: 200,
            p: 500,
            iterations: 150,
            ..ConvergenceConfig::default()
        };
        let identity = run_convergence(&base).unwrap();
        let sketched = run_convergence(&ConvergenceConfig {
            sketch: Some(SketchGeometry::standard(3, 256)),
            ..base
        })
        .unwrap();
        assert!(sketched.plateau >= identity.plateau * 0.999, "{} vs {}", sketched.plateau, identity.plateau);
    }
}
