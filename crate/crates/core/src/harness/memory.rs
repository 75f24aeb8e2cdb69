//! Smallest sketch width that recovers the planted support in every trial.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{recover, RecoveryAlgorithm, RecoverySettings};
use crate::countsketch::SketchGeometry;
use crate::data::{generate_design, SyntheticDesign};
use crate::error::{Error, Result};
use crate::hashing::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    pub p_values: Vec<usize>,
    pub n: usize,
    pub k: usize,
    pub depth: usize,
    pub trials: usize,
    /// First width tried by the doubling search.
    pub initial_width: usize,
    /// Widths above this are not tried; the point is reported censored.
    pub width_cap: usize,
    /// Bisection stops once the bracket is within this fraction of its
    /// upper end.
    pub resolution: f64,
    pub settings: RecoverySettings,
    pub base_seed: u64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            p_values: (10..=16).map(|e| 1usize << e).collect(),
            n: 100,
            k: 5,
            depth: 3,
            trials: 100,
            initial_width: 8,
            width_cap: 1 << 18,
            resolution: 0.125,
            settings: RecoverySettings::default(),
            base_seed: 2018,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryPoint {
    pub p: usize,
    /// Smallest width found; the cap when censored.
    pub width: usize,
    /// Counters in the sketch at that width.
    pub counters: usize,
    pub censored: bool,
    pub widths_tried: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryResult {
    pub points: Vec<MemoryPoint>,
    /// `width ~ intercept + slope * log2(p)^2` over uncensored points.
    pub fit_intercept: f64,
    pub fit_slope: f64,
}

impl MemoryResult {
    pub fn width_at(&self, p: usize) -> Option<&MemoryPoint> {
        self.points.iter().find(|pt| pt.p == p)
    }
}

pub fn run_memory_scaling(config: &MemoryConfig) -> Result<MemoryResult> {
    if config.trials == 0 || config.initial_width == 0 || config.width_cap < config.initial_width {
        return Err(Error::Config("memory scaling needs trials and 0 < initial_width <= width_cap".into()));
    }
    let points = config
        .p_values
        .iter()
        .map(|&p| minimal_width(config, p))
        .collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|pt| !pt.censored)
        .map(|pt| ((pt.p as f64).log2().powi(2), pt.width as f64))
        .collect();
    let (fit_intercept, fit_slope) = fit_log_squared(&xy);
    Ok(MemoryResult {
        points,
        fit_intercept,
        fit_slope,
    })
}

/// Least-squares line through `(x, y)` pairs. NaN with fewer than two points.
pub fn fit_log_squared(xy: &[(f64, f64)]) -> (f64, f64) {
    if xy.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|v| v.0).sum::<f64>() / n;
    let my = xy.iter().map(|v| v.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|v| (v.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0);
    }
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn all_recover(config: &MemoryConfig, p: usize, width: usize) -> Result<bool> {
    let geometry = SketchGeometry::standard(config.depth, width);
    let failed = (0..config.trials).into_par_iter().find_map_first(|trial| {
        let seed = derive_seed(config.base_seed, &[p as u64, trial as u64]);
        let run = || -> Result<bool> {
            let problem = generate_design(&SyntheticDesign::new(p, config.n, config.k, seed))?;
            let settings = RecoverySettings {
                sketch_seed: derive_seed(seed, &[width as u64]),
                ..config.settings
            };
            Ok(recover(&problem, config.k, RecoveryAlgorithm::Mission(geometry), &settings, false)?
                .recovered)
        };
        match run() {
            Ok(true) => None,
            Ok(false) => Some(Ok(())),
            Err(e) => Some(Err(e)),
        }
    });
    match failed {
        None => Ok(true),
        Some(Ok(())) => Ok(false),
        Some(Err(e)) => Err(e),
    }
}

/// Doubling from `initial_width`, then bisection inside the last bracket.
fn minimal_width(config: &MemoryConfig, p: usize) -> Result<MemoryPoint> {
    let mut tried = 0;
    let mut lo = 0;
    let mut hi = config.initial_width;
    loop {
        tried += 1;
        if all_recover(config, p, hi)? {
            break;
        }
        lo = hi;
        if hi >= config.width_cap {
            log::info!("p={p}: no width up to {} recovers every trial", config.width_cap);
            return Ok(MemoryPoint {
                p,
                width: config.width_cap,
                counters: config.width_cap * config.depth,
                censored: true,
                widths_tried: tried,
            });
        }
        hi = (hi * 2).min(config.width_cap);
    }
    while hi - lo > 1 && (hi - lo) as f64 > config.resolution * hi as f64 {
        let mid = lo + (hi - lo) / 2;
        tried += 1;
        if all_recover(config, p, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    log::info!("p={p}: minimal width {hi}");
    Ok(MemoryPoint {
        p,
        width: hi,
        counters: hi * config.depth,
        censored: false,
        widths_tried: tried,
    })
}
