//! CSV tables and the JSON run manifest.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use super::{
    run_attenuation, run_convergence, run_memory_scaling, run_phase_transition, run_tradeoff,
    ExperimentKind,
};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub kind: ExperimentKind,
    pub crate_version: &'static str,
    /// Fully resolved configuration, defaults included.
    pub config: Value,
    pub summary: Value,
    pub outputs: Vec<String>,
    pub elapsed_seconds: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn parse<T: DeserializeOwned>(config: &Value) -> Result<T> {
    Ok(serde_json::from_value(config.clone())?)
}

#[derive(Serialize)]
struct ErrorRow {
    iteration: usize,
    error: f64,
}

#[derive(Serialize)]
struct TradeoffRow<'a> {
    #[serde(serialize_with = "finite_or_empty")]
    ratio: f64,
    width: usize,
    sketch: &'a str,
    mean_accuracy: f64,
    sd_accuracy: f64,
}

fn finite_or_empty<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Runs one experiment from a JSON config (missing fields take defaults) and
/// writes `<kind>.csv` tables plus `manifest.json` into `out_dir`.
pub fn run_experiment(kind: ExperimentKind, config: &Value, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let name = kind.name();
    let mut outputs = Vec::new();
    let mut table = |suffix: &str| {
        let file = format!("{name}{suffix}.csv");
        outputs.push(file.clone());
        out_dir.join(file)
    };
    let (resolved, summary) = match kind {
        ExperimentKind::PhaseTransition => {
            let cfg: super::PhaseConfig = parse(config)?;
            let res = run_phase_transition(&cfg)?;
            write_csv(&table(""), &res.cells)?;
            write_csv(&table("-contours"), &res.contours)?;
            (serde_json::to_value(&cfg)?, json!({ "contours": res.contours }))
        }
        ExperimentKind::Attenuation => {
            let cfg: super::AttenuationConfig = parse(config)?;
            let res = run_attenuation(&cfg)?;
            write_csv(&table(""), &res.rows)?;
            write_csv(&table("-summary"), &res.summary)?;
            (serde_json::to_value(&cfg)?, json!({ "summary": res.summary }))
        }
        ExperimentKind::MemoryScaling => {
            let cfg: super::MemoryConfig = parse(config)?;
            let res = run_memory_scaling(&cfg)?;
            write_csv(&table(""), &res.points)?;
            (
                serde_json::to_value(&cfg)?,
                json!({
                    "points": res.points,
                    "fit": { "intercept": res.fit_intercept, "slope_per_log2p_squared": res.fit_slope },
                }),
            )
        }
        ExperimentKind::Tradeoff => {
            let cfg: super::TradeoffConfig = parse(config)?;
            let res = run_tradeoff(&cfg)?;
            let rows: Vec<TradeoffRow> = res
                .points
                .iter()
                .chain(std::iter::once(&res.identity))
                .map(|p| TradeoffRow {
                    ratio: p.ratio,
                    width: p.width,
                    sketch: if p.identity { "identity" } else { "standard" },
                    mean_accuracy: p.mean_accuracy,
                    sd_accuracy: p.sd_accuracy,
                })
                .collect();
            write_csv(&table(""), &rows)?;
            (
                serde_json::to_value(&cfg)?,
                json!({ "identity_accuracy": res.identity.mean_accuracy }),
            )
        }
        ExperimentKind::Convergence => {
            let cfg: super::ConvergenceConfig = parse(config)?;
            let res = run_convergence(&cfg)?;
            let rows: Vec<ErrorRow> = res
                .errors
                .iter()
                .enumerate()
                .map(|(iteration, &error)| ErrorRow { iteration, error })
                .collect();
            write_csv(&table(""), &rows)?;
            (
                serde_json::to_value(&cfg)?,
                json!({
                    "decay_ratio": res.decay_ratio,
                    "decay_iterations": res.decay_iterations,
                    "plateau": res.plateau,
                    "diverged": res.diverged,
                }),
            )
        }
    };
    let manifest = Manifest {
        kind,
        crate_version: env!("CARGO_PKG_VERSION"),
        config: resolved,
        summary,
        outputs,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_run_writes_table_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let config = json!({ "n": 60, "p": 80, "k": 2, "iterations": 20 });
        let manifest = run_experiment(ExperimentKind::Convergence, &config, dir.path()).unwrap();
        assert_eq!(manifest.outputs, vec!["convergence.csv".to_string()]);
        let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
        assert!(csv.starts_with("iteration,error\n0,"));
        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["config"]["seed"], 2018);
        assert_eq!(back["kind"], "convergence");
    }

    #[test]
    fn unknown_fields_are_errors_only_when_mistyped() {
        let dir = tempfile::tempdir().unwrap();
        let bad = json!({ "n": "many" });
        assert!(run_experiment(ExperimentKind::Convergence, &bad, dir.path()).is_err());
    }
}
