//! Synthetic recovery studies: phase transition, attenuation, memory scaling,
//! sketch-size trade-off and convergence.
//!
//! Every trial seed is derived from the base seed and the trial's grid
//! coordinates, so results do not depend on the order in which cells run.

mod attenuation;
mod convergence;
mod memory;
mod output;
mod phase;
mod recovery;
mod tradeoff;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use attenuation::{run_attenuation, AttenuationConfig, AttenuationResult, AttenuationSummary};
pub use convergence::{run_convergence, ConvergenceConfig, ConvergenceResult};
pub use memory::{fit_log_squared, run_memory_scaling, MemoryConfig, MemoryPoint, MemoryResult};
pub use output::{run_experiment, write_csv, Manifest};
pub use phase::{contour, run_phase_transition, PhaseCell, PhaseConfig, PhaseResult};
pub use recovery::{
    distance, recover, GradientMode, RecoveryAlgorithm, RecoveryOutcome, RecoverySettings,
};
pub use tradeoff::{run_tradeoff, TradeoffConfig, TradeoffPoint, TradeoffResult};

use crate::error::{Error, Result};

/// Decay factor for inactive sketch cells: `max(floor, initial - decrement * round)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSchedule {
    pub initial: f64,
    pub decrement: f64,
    pub floor: f64,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule {
            initial: 0.999,
            decrement: 0.0005,
            floor: 0.9,
        }
    }
}

impl GammaSchedule {
    pub fn constant(gamma: f64) -> Self {
        GammaSchedule {
            initial: gamma,
            decrement: 0.0,
            floor: gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.floor
            && self.floor <= self.initial
            && self.initial < 1.0
            && self.decrement >= 0.0
            && self.decrement.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid gamma schedule {self:?}")))
        }
    }

    pub fn at(&self, round: usize) -> f64 {
        (self.initial - self.decrement * round as f64).max(self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PhaseTransition,
    Attenuation,
    MemoryScaling,
    Tradeoff,
    Convergence,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::PhaseTransition,
        ExperimentKind::Attenuation,
        ExperimentKind::MemoryScaling,
        ExperimentKind::Tradeoff,
        ExperimentKind::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseTransition => "phase-transition",
            ExperimentKind::Attenuation => "attenuation",
            ExperimentKind::MemoryScaling => "memory-scaling",
            ExperimentKind::Tradeoff => "tradeoff",
            ExperimentKind::Convergence => "convergence",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
