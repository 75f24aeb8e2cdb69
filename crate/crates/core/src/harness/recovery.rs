//! Support recovery on a dense synthetic problem with MISSION or IHT.

use serde::{Deserialize, Serialize};

use super::GammaSchedule;
use crate::countsketch::SketchGeometry;
use crate::data::SyntheticProblem;
use crate::error::{Error, Result};
use crate::metrics::support_recovered;
use crate::model::{IhtModel, Learner, LinearModel, MissionConfig, MissionModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryAlgorithm {
    Mission(SketchGeometry),
    Iht,
}

impl RecoveryAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            RecoveryAlgorithm::Mission(_) => "mission",
            RecoveryAlgorithm::Iht => "iht",
        }
    }
}

/// How one iteration consumes the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// One step with the gradient of all rows.
    #[default]
    Full,
    /// One step per row, rows in order.
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoverySettings {
    pub max_iterations: usize,
    /// Stop once the active support is unchanged for this many iterations.
    pub stable_iterations: usize,
    /// Decay of inactive sketch cells after each iteration (MISSION only).
    pub gamma: Option<GammaSchedule>,
    pub mode: GradientMode,
    /// Step size as a fraction of `1 / max column norm^2`.
    pub step_scale: f64,
    pub sketch_seed: u64,
}

impl Default for RecoverySettings {
    fn default() -> Self {
        RecoverySettings {
            max_iterations: 1000,
            stable_iterations: 10,
            gamma: Some(GammaSchedule::default()),
            mode: GradientMode::Full,
            step_scale: 0.5,
            sketch_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    /// Ascending ids of the final active set.
    pub support: Vec<u64>,
    pub recovered: bool,
    pub iterations: usize,
    /// Iterates became non-finite; counted as a failed recovery.
    pub diverged: bool,
    /// `||beta_t - beta*||_2` after every iteration when tracked.
    pub errors: Vec<f64>,
}

enum Solver {
    Mission(MissionModel),
    Iht(IhtModel),
}

impl Solver {
    fn learner(&mut self) -> &mut dyn Learner {
        match self {
            Solver::Mission(m) => m,
            Solver::Iht(m) => m,
        }
    }

    fn active(&self) -> Vec<(u64, f64)> {
        match self {
            Solver::Mission(m) => m.active(0),
            Solver::Iht(m) => m.active(0),
        }
    }
}

/// Runs one recovery. The learning rate is
/// `step_scale / max_j ||X_j||^2`.
pub fn recover(
    problem: &SyntheticProblem,
    k: usize,
    algorithm: RecoveryAlgorithm,
    settings: &RecoverySettings,
    track_error: bool,
) -> Result<RecoveryOutcome> {
    let design = &problem.design;
    let p = design.cols();
    let rate = settings.step_scale / design.max_column_sq_norm().max(f64::MIN_POSITIVE);
    let mut solver = match algorithm {
        RecoveryAlgorithm::Mission(geometry) => Solver::Mission(MissionModel::new(
            MissionConfig::new(1, k, geometry, settings.sketch_seed),
        )?),
        RecoveryAlgorithm::Iht => Solver::Iht(IhtModel::new(1, k)?),
    };
    let planted = problem.planted();
    let y = &problem.responses;
    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut previous: Option<Vec<u64>> = None;
    let mut stable = 0;
    let mut errors = Vec::new();
    let mut iterations = 0;
    let mut diverged = false;
    let mut step = Vec::with_capacity(p);
    for it in 0..settings.max_iterations {
        iterations = it + 1;
        let mut residual_norm = 0.0;
        match settings.mode {
            GradientMode::Full => {
                let beta = solver.active();
                let fitted = design.mul_sparse(&beta);
                let residual: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
                residual_norm = residual.iter().map(|r| r * r).sum::<f64>().sqrt();
                if !residual_norm.is_finite() {
                    diverged = true;
                    break;
                }
                step.clear();
                step.extend(
                    design
                        .mul_transpose(&residual)
                        .into_iter()
                        .enumerate()
                        .map(|(j, g)| (j as u64, 2.0 * rate * g))
                        .filter(|e| e.1 != 0.0),
                );
                if absorb(solver.learner(), &step)? {
                    diverged = true;
                    break;
                }
            }
            GradientMode::Stochastic => {
                for (i, &target) in y.iter().enumerate() {
                    let row = design.row(i);
                    let beta = solver.active();
                    let score: f64 = beta.iter().map(|&(j, w)| row[j as usize] * w).sum();
                    let r = target - score;
                    if !r.is_finite() {
                        diverged = true;
                        break;
                    }
                    residual_norm += r * r;
                    step.clear();
                    step.extend(
                        row.iter()
                            .enumerate()
                            .map(|(j, x)| (j as u64, 2.0 * rate * r * x))
                            .filter(|e| e.1 != 0.0),
                    );
                    if absorb(solver.learner(), &step)? {
                        diverged = true;
                        break;
                    }
                }
                if diverged {
                    break;
                }
                residual_norm = residual_norm.sqrt();
            }
        }
        if let (Solver::Mission(m), Some(schedule)) = (&mut solver, settings.gamma) {
            m.decay_inactive(schedule.at(it))?;
        }
        let active = solver.active();
        if track_error {
            errors.push(distance(&active, &planted));
        }
        let mut ids: Vec<u64> = active.iter().map(|e| e.0).collect();
        ids.sort_unstable();
        if previous.as_ref() == Some(&ids) {
            stable += 1;
        } else {
            stable = 0;
            previous = Some(ids);
        }
        if stable >= settings.stable_iterations || residual_norm <= 1e-12 * y_norm {
            break;
        }
    }
    let support = previous.unwrap_or_default();
    Ok(RecoveryOutcome {
        recovered: !diverged && support_recovered(&support, &problem.support),
        diverged,
        support,
        iterations,
        errors,
    })
}

/// Applies a step; `Ok(true)` when the iterates overflowed.
fn absorb(learner: &mut dyn Learner, step: &[(u64, f64)]) -> Result<bool> {
    match learner.apply_gradient(0, step) {
        Ok(()) => Ok(false),
        Err(Error::NumericInput { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Euclidean distance between two sparse vectors.
pub fn distance(a: &[(u64, f64)], b: &[(u64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(i, x) in a {
        let y = b.iter().find(|e| e.0 == i).map_or(0.0, |e| e.1);
        total += (x - y).powi(2);
    }
    for &(i, y) in b {
        if !a.iter().any(|e| e.0 == i) {
            total += y * y;
        }
    }
    total.sqrt()
}
