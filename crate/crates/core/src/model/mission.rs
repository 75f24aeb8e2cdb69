use serde::{Deserialize, Serialize};

use super::{LinearModel, Learner};
use crate::countsketch::{CountSketch, SketchGeometry, SketchMode};
use crate::error::{finite, Error, Result};
use crate::hashing::derive_seed;
use crate::topk::TopKHeap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub classes: usize,
    pub top_k: usize,
    /// Geometry of each class's sketch.
    pub geometry: SketchGeometry,
    pub seed: u64,
    #[serde(default)]
    pub lazy_threshold: f64,
}

impl MissionConfig {
    pub fn new(classes: usize, top_k: usize, geometry: SketchGeometry, seed: u64) -> Self {
        MissionConfig {
            classes,
            top_k,
            geometry,
            seed,
            lazy_threshold: 0.0,
        }
    }

    /// Splits `budget` counters evenly over `depth` rows and `classes`
    /// sketches.
    pub fn from_budget(
        budget: usize,
        depth: usize,
        classes: usize,
        top_k: usize,
        seed: u64,
    ) -> Result<Self> {
        let width = budget / (depth.max(1) * classes.max(1));
        let geometry = SketchGeometry::standard(depth, width);
        geometry.validate()?;
        Ok(Self::new(classes, top_k, geometry, seed))
    }

    pub fn class_seed(&self, class: usize) -> u64 {
        derive_seed(self.seed, &[class as u64])
    }
}

/// Gradients accumulate in a Count-Sketch per class; the active weights are
/// the top-k heavy hitters kept in a heap.
#[derive(Debug, Clone)]
pub struct MissionModel {
    config: MissionConfig,
    sketches: Vec<CountSketch>,
    heaps: Vec<TopKHeap>,
    log: Option<Vec<(usize, u64, f64)>>,
    untracked: Vec<u64>,
}

impl MissionModel {
    pub fn new(config: MissionConfig) -> Result<Self> {
        if config.classes == 0 {
            return Err(Error::Config("model needs at least one class".into()));
        }
        let sketches = (0..config.classes)
            .map(|c| CountSketch::new(config.geometry, config.class_seed(c)))
            .collect::<Result<Vec<_>>>()?;
        let heaps = (0..config.classes)
            .map(|_| TopKHeap::with_lazy_threshold(config.top_k, config.lazy_threshold))
            .collect::<Result<Vec<_>>>()?;
        Ok(MissionModel {
            config,
            sketches,
            heaps,
            log: None,
            untracked: Vec::new(),
        })
    }

    /// Records every gradient entry added to the sketches.
    pub fn with_gradient_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn gradient_log(&self) -> Option<&[(usize, u64, f64)]> {
        self.log.as_deref()
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn sketch(&self, class: usize) -> &CountSketch {
        &self.sketches[class]
    }

    pub fn heap(&self, class: usize) -> &TopKHeap {
        &self.heaps[class]
    }

    /// Shrinks accumulated gradients of features outside the heap by
    /// `gamma`, leaving the active weights in place.
    ///
    /// Identity sketches scale the inactive cells directly. Standard sketches
    /// use linearity: scale everything, then add `(1 - gamma) * w` back for
    /// each active feature so its estimate is preserved.
    pub fn decay_inactive(&mut self, gamma: f64) -> Result<()> {
        finite("decay factor", gamma)?;
        if gamma == 1.0 {
            return Ok(());
        }
        for (sketch, heap) in self.sketches.iter_mut().zip(&self.heaps) {
            match sketch.mode() {
                SketchMode::Identity => sketch.scale_except(gamma, heap.ids())?,
                SketchMode::Standard => {
                    sketch.scale(gamma)?;
                    for (id, w) in heap.iter() {
                        sketch.update_unchecked(id, (1.0 - gamma) * w);
                    }
                }
            }
        }
        Ok(())
    }

    /// Combines models trained on disjoint shards.
    ///
    /// Sketches are summed; the heap is rebuilt by querying the merged
    /// sketch at every feature any shard kept active.
    pub fn merge_shards(shards: &[MissionModel]) -> Result<MissionModel> {
        let first = shards
            .first()
            .ok_or_else(|| Error::Config("no shards to merge".into()))?;
        let mut merged = MissionModel::new(first.config)?;
        for shard in shards {
            if shard.config != first.config {
                return Err(Error::IncompatibleSketch(
                    "shards were built with different configurations".into(),
                ));
            }
            for (acc, s) in merged.sketches.iter_mut().zip(&shard.sketches) {
                acc.merge_from(s)?;
            }
        }
        for c in 0..merged.config.classes {
            let mut candidates: Vec<u64> = shards.iter().flat_map(|s| s.heaps[c].ids()).collect();
            candidates.sort_unstable();
            candidates.dedup();
            for id in candidates {
                let est = merged.sketches[c].query(id);
                merged.heaps[c].offer(id, est)?;
            }
        }
        Ok(merged)
    }
}

impl LinearModel for MissionModel {
    fn num_classes(&self) -> usize {
        self.config.classes
    }

    fn weight(&self, class: usize, id: u64) -> f64 {
        self.heaps[class].get(id).unwrap_or(0.0)
    }

    fn active(&self, class: usize) -> Vec<(u64, f64)> {
        let mut top = self.heaps[class].top();
        top.retain(|e| e.1 != 0.0);
        top
    }
}

impl Learner for MissionModel {
    /// Adds the step to the sketch, then re-queries every touched feature
    /// and offers the estimate to the heap. Already-tracked features are
    /// refreshed before new candidates compete for a slot.
    fn apply_gradient(&mut self, class: usize, gradient: &[(u64, f64)]) -> Result<()> {
        for &(_, g) in gradient {
            finite("gradient", g)?;
        }
        let sketch = &mut self.sketches[class];
        for &(id, g) in gradient {
            sketch.update_unchecked(id, g);
        }
        if let Some(log) = &mut self.log {
            log.extend(gradient.iter().map(|&(id, g)| (class, id, g)));
        }
        let heap = &mut self.heaps[class];
        self.untracked.clear();
        for &(id, _) in gradient {
            if heap.contains(id) {
                heap.offer(id, sketch.query(id))?;
            } else {
                self.untracked.push(id);
            }
        }
        for &id in &self.untracked {
            let est = sketch.query(id);
            if est != 0.0 {
                heap.offer(id, est)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::data::{DenseMatrix, SparseExample};
    use crate::loss::{LossKind, LossSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn identity_model(p: usize, k: usize) -> MissionModel {
        MissionModel::new(MissionConfig::new(1, k, SketchGeometry::identity(p), 1)).unwrap()
    }

    #[test]
    fn budget_split_per_class() {
        let cfg = MissionConfig::from_budget(16_777_216, 3, 15, 16_384, 0).unwrap();
        assert_eq!(cfg.geometry.width, 372_827);
        assert!(MissionConfig::from_budget(10, 3, 15, 1, 0).is_err());
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut model = identity_model(10, 3);
        let loss = LossSpec::new(LossKind::Hinge, 1.0, 1).unwrap();
        let mut warm = SparseExample::from_pairs([(2, 1.0)], 1.0).unwrap();
        model.step(&loss, &warm).unwrap();
        let before = (model.sketch(0).clone(), model.heap(0).top());
        // Score 1.0 * 1.0 satisfies the margin.
        warm.set_label(1.0);
        model.step(&loss, &warm).unwrap();
        assert_eq!(model.sketch(0), &before.0);
        assert_eq!(model.heap(0).top(), before.1);
    }

    #[test]
    fn least_squares_with_identity_sketch() {
        let (n, p) = (20, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let design = DenseMatrix::from_rows(n, p, x).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let oracle = least_squares(&design, &y);

        // Full-batch cycling: each iteration applies the summed step of all rows.
        let rate = 0.25 / design.column_sq_norms().iter().sum::<f64>();
        let mut model = identity_model(p, p);
        for _ in 0..5000 {
            let beta: Vec<(u64, f64)> = (0..p as u64).map(|j| (j, model.weight(0, j))).collect();
            let fitted = design.mul_sparse(&beta);
            let residual: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            let step: Vec<(u64, f64)> = design
                .mul_transpose(&residual)
                .iter()
                .enumerate()
                .map(|(j, g)| (j as u64, 2.0 * rate * g))
                .collect();
            model.apply_gradient(0, &step).unwrap();
        }
        for j in 0..p {
            let w = model.weight(0, j as u64);
            assert!((w - oracle[j]).abs() < 1e-3, "coef {j}: {w} vs {}", oracle[j]);
        }
    }

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn least_squares(x: &DenseMatrix, y: &[f64]) -> Vec<f64> {
        let p = x.cols();
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..x.rows() {
            let row = x.row(i);
            for r in 0..p {
                for c in 0..p {
                    a[r][c] += row[r] * row[c];
                }
                a[r][p] += row[r] * y[i];
            }
        }
        for col in 0..p {
            let pivot = (col..p)
                .max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())
                .unwrap();
            a.swap(col, pivot);
            for r in 0..p {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=p {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..p).map(|r| a[r][p] / a[r][r]).collect()
    }

    #[test]
    fn sketch_equals_sketch_of_summed_gradients() {
        let geometry = SketchGeometry::standard(3, 64);
        let mut model =
            MissionModel::new(MissionConfig::new(2, 4, geometry, 77)).unwrap().with_gradient_log();
        let loss = LossSpec::new(LossKind::CrossEntropy, 0.2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let pairs: Vec<(u64, f64)> =
                (0..5).map(|_| (rng.random_range(0..500), rng.random_range(-1.0..1.0))).collect();
            let ex = SparseExample::from_pairs(pairs, rng.random_range(0..2) as f64).unwrap();
            model.step(&loss, &ex).unwrap();
        }
        for c in 0..2 {
            let mut replay = CountSketch::new(geometry, model.config().class_seed(c)).unwrap();
            for &(class, id, g) in model.gradient_log().unwrap() {
                if class == c {
                    replay.update(id, g).unwrap();
                }
            }
            assert_eq!(replay.counters(), model.sketch(c).counters());
            assert!(model.active(c).len() <= 4);
        }
    }

    #[test]
    fn identity_full_capacity_equals_dense_sgd() {
        let p = 10;
        let mut model = identity_model(p, p);
        let mut dense = vec![0.0; p];
        let loss = LossSpec::new(LossKind::Logistic, 0.3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let pairs: Vec<(u64, f64)> =
                (0..4).map(|_| (rng.random_range(0..p as u64), rng.random_range(-2.0..2.0))).collect();
            let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let ex = SparseExample::from_pairs(pairs, label).unwrap();
            let s = ex.dot_with(|i| dense[i as usize]);
            let mut coef = Vec::new();
            loss.coefficients(&[s], label, &mut coef).unwrap();
            for (i, v) in ex.iter() {
                dense[i as usize] += coef[0] * v;
            }
            model.step(&loss, &ex).unwrap();
        }
        for j in 0..p {
            assert_eq!(model.weight(0, j as u64), dense[j]);
        }
    }

    #[test]
    fn decay_keeps_active_weights() {
        let mut model = identity_model(6, 2);
        model
            .apply_gradient(0, &[(0, 5.0), (1, -4.0), (2, 1.0), (3, 0.5)])
            .unwrap();
        model.decay_inactive(0.5).unwrap();
        assert_eq!(model.sketch(0).counters(), &[5.0, -4.0, 0.5, 0.25, 0.0, 0.0]);
        assert_eq!(model.active(0), vec![(0, 5.0), (1, -4.0)]);

        let mut standard =
            MissionModel::new(MissionConfig::new(1, 1, SketchGeometry::standard(3, 1024), 5))
                .unwrap();
        standard.apply_gradient(0, &[(10, 2.0), (11, 0.5)]).unwrap();
        standard.decay_inactive(0.5).unwrap();
        assert!((standard.sketch(0).query(10) - 2.0).abs() < 1e-12);
        assert!((standard.sketch(0).query(11) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn merged_shards_match_single_stream() {
        let cfg = MissionConfig::new(1, 32, SketchGeometry::standard(3, 256), 3);
        let updates: Vec<Vec<(u64, f64)>> = (0..40)
            .map(|i| vec![(i % 13, 1.0 + i as f64 / 10.0), (100 + i % 5, -0.5)])
            .collect();
        let mut whole = MissionModel::new(cfg).unwrap();
        let mut a = MissionModel::new(cfg).unwrap();
        let mut b = MissionModel::new(cfg).unwrap();
        for (i, g) in updates.iter().enumerate() {
            whole.apply_gradient(0, g).unwrap();
            if i % 2 == 0 { &mut a } else { &mut b }.apply_gradient(0, g).unwrap();
        }
        let merged = MissionModel::merge_shards(&[a, b]).unwrap();
        let diff = merged
            .sketch(0)
            .counters()
            .iter()
            .zip(whole.sketch(0).counters())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9);
        let (m, w) = (merged.active(0), whole.active(0));
        assert_eq!(m.len(), w.len());
        for ((i, a), (j, b)) in m.iter().zip(&w) {
            assert_eq!(i, j);
            assert!((a - b).abs() < 1e-9);
        }
    }
}
