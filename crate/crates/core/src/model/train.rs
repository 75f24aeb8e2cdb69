use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{Learner, MissionConfig, MissionModel};
use crate::data::ExampleSource;
use crate::error::{Error, Result};
use crate::loss::LossSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub max_epochs: usize,
    /// Stop once the relative drop in mean epoch loss falls below this.
    pub plateau: Option<f64>,
}

impl StoppingRule {
    pub fn epochs(max_epochs: usize) -> Self {
        StoppingRule {
            max_epochs,
            plateau: None,
        }
    }

    pub fn with_plateau(mut self, tolerance: f64) -> Self {
        self.plateau = Some(tolerance);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss of each example just before its step.
    pub mean_loss: f64,
    pub steps: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub steps: u64,
    pub stopped_on_plateau: bool,
}

pub fn train<M, S>(model: &mut M, loss: &LossSpec, source: &S, stop: &StoppingRule) -> Result<TrainReport>
where
    M: Learner + ?Sized,
    S: ExampleSource + ?Sized,
{
    train_with(model, loss, source, stop, |_, _| Ok(()))
}

/// Like [`train`], calling `on_epoch` after every completed epoch.
pub fn train_with<M, S, F>(
    model: &mut M,
    loss: &LossSpec,
    source: &S,
    stop: &StoppingRule,
    mut on_epoch: F,
) -> Result<TrainReport>
where
    M: Learner + ?Sized,
    S: ExampleSource + ?Sized,
    F: FnMut(&EpochStats, &M) -> Result<()>,
{
    let mut report = TrainReport::default();
    for epoch in 0..stop.max_epochs {
        let started = Instant::now();
        let mut total = 0.0;
        let mut steps = 0u64;
        for (record, example) in source.open_epoch(epoch)?.enumerate() {
            let example = example?;
            total += model.step(loss, &example).map_err(|e| Error::Record {
                record: record + 1,
                source: Box::new(e),
            })?;
            steps += 1;
        }
        model.end_epoch()?;
        let stats = EpochStats {
            epoch,
            mean_loss: if steps > 0 { total / steps as f64 } else { 0.0 },
            steps,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::debug!("epoch {epoch}: loss {:.6} over {steps} steps", stats.mean_loss);
        report.steps += steps;
        on_epoch(&stats, model)?;
        let previous = report.epochs.last().map(|e| e.mean_loss);
        report.epochs.push(stats);
        if let (Some(tol), Some(prev)) = (stop.plateau, previous) {
            let cur = report.epochs[report.epochs.len() - 1].mean_loss;
            let scale = prev.abs().max(f64::MIN_POSITIVE);
            if (prev - cur) / scale < tol {
                report.stopped_on_plateau = true;
                break;
            }
        }
    }
    Ok(report)
}

/// Trains one model per shard in parallel and merges them.
pub fn train_sharded<S>(
    config: MissionConfig,
    loss: &LossSpec,
    shards: &[S],
    stop: &StoppingRule,
) -> Result<(MissionModel, Vec<TrainReport>)>
where
    S: ExampleSource,
{
    let trained: Vec<(MissionModel, TrainReport)> = shards
        .par_iter()
        .map(|shard| {
            let mut model = MissionModel::new(config)?;
            let report = train(&mut model, loss, shard, stop)?;
            Ok((model, report))
        })
        .collect::<Result<_>>()?;
    let (models, reports): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    Ok((MissionModel::merge_shards(&models)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countsketch::SketchGeometry;
    use crate::data::{generate_multiclass, MemorySource, MultiClassDesign, SparseExample};
    use crate::loss::LossKind;
    use crate::metrics::accuracy;
    use crate::model::{predicted_label, IhtModel, LinearModel};

    fn mission(classes: usize, k: usize) -> MissionModel {
        MissionModel::new(MissionConfig::new(classes, k, SketchGeometry::standard(3, 512), 9))
            .unwrap()
    }

    #[test]
    fn zero_epochs_leave_model_untouched() {
        let source = MemorySource::new(vec![SparseExample::from_pairs([(1, 1.0)], 1.0).unwrap()]);
        let loss = LossSpec::new(LossKind::Logistic, 0.5, 1).unwrap();
        let mut model = mission(1, 4);
        let report = train(&mut model, &loss, &source, &StoppingRule::epochs(0)).unwrap();
        assert_eq!(report.steps, 0);
        assert!(report.epochs.is_empty());
        assert!(model.sketch(0).is_zero());
    }

    #[test]
    fn fixed_seed_runs_are_identical() {
        let data = generate_multiclass(&MultiClassDesign::default()).unwrap();
        let source = MemorySource::new(data.examples).shuffled(4);
        let loss = LossSpec::new(LossKind::CrossEntropy, 0.1, 5).unwrap();
        let run = || {
            let mut model = mission(5, 30);
            train(&mut model, &loss, &source, &StoppingRule::epochs(2)).unwrap();
            (0..5).map(|c| model.active(c)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn label_errors_carry_record_index() {
        let examples = vec![
            SparseExample::from_pairs([(1, 1.0)], 1.0).unwrap(),
            SparseExample::from_pairs([(1, 1.0)], 0.0).unwrap(),
        ];
        let loss = LossSpec::new(LossKind::Logistic, 0.5, 1).unwrap();
        let mut model = IhtModel::new(1, 2).unwrap();
        match train(&mut model, &loss, &MemorySource::new(examples), &StoppingRule::epochs(1)) {
            Err(Error::Record { record: 2, source }) => {
                assert!(matches!(*source, Error::LabelDomain { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn plateau_rule_stops_early() {
        let source = MemorySource::new(vec![SparseExample::from_pairs([(1, 1.0)], 1.0).unwrap()]);
        let loss = LossSpec::new(LossKind::Hinge, 1.0, 1).unwrap();
        let mut model = IhtModel::new(1, 2).unwrap();
        let stop = StoppingRule::epochs(50).with_plateau(1e-4);
        let report = train(&mut model, &loss, &source, &stop).unwrap();
        assert!(report.stopped_on_plateau);
        assert!(report.epochs.len() < 50);
    }

    #[test]
    fn multiclass_accuracy_improves_over_epochs() {
        let spec = MultiClassDesign {
            examples: 3000,
            ..MultiClassDesign::default()
        };
        let data = generate_multiclass(&spec).unwrap();
        let (train_set, test_set) = data.examples.split_at(2000);
        let source = MemorySource::new(train_set.to_vec()).shuffled(1);
        let loss = LossSpec::new(LossKind::CrossEntropy, 0.02, 5).unwrap();
        let mut model = mission(5, 40);
        let mut curve = Vec::new();
        train_with(&mut model, &loss, &source, &StoppingRule::epochs(5), |_, m| {
            let pred: Vec<f64> = test_set.iter().map(|e| predicted_label(&m.predict(e))).collect();
            let truth: Vec<f64> = test_set.iter().map(|e| e.label()).collect();
            curve.push(accuracy(&pred, &truth)?);
            Ok(())
        })
        .unwrap();
        assert!(curve[4] > curve[0], "{curve:?}");
        for w in curve.windows(2) {
            assert!(w[1] >= w[0] - 0.02, "{curve:?}");
        }
    }

    #[test]
    fn sharded_training_merges() {
        let data = generate_multiclass(&MultiClassDesign::default()).unwrap();
        let shards: Vec<MemorySource> = data
            .examples
            .chunks(500)
            .map(|c| MemorySource::new(c.to_vec()))
            .collect();
        let loss = LossSpec::new(LossKind::CrossEntropy, 0.1, 5).unwrap();
        let config = MissionConfig::new(5, 30, SketchGeometry::standard(3, 512), 9);
        let (model, reports) =
            train_sharded(config, &loss, &shards, &StoppingRule::epochs(1)).unwrap();
        assert_eq!(reports.len(), 4);
        assert!(reports.iter().all(|r| r.steps == 500));
        assert!((0..5).all(|c| !model.active(c).is_empty()));
    }
}
