use super::{LinearModel, Learner};
use crate::error::{finite, Error, Result};
use crate::hashing::keyed;
use crate::topk::sort_by_magnitude;

/// Bucket of feature `id` in a table of `buckets` weights.
#[inline]
pub fn bucket_of(seed: u64, id: u64, buckets: usize) -> usize {
    (keyed(seed, id) % buckets as u64) as usize
}

/// Smallest power of two that is at least `dimension`.
pub fn buckets_for(dimension: u64) -> usize {
    dimension.max(1).next_power_of_two() as usize
}

/// Dense SGD over hashed buckets. Colliding features share one weight.
#[derive(Debug, Clone)]
pub struct FeatureHashModel {
    buckets: usize,
    classes: usize,
    seed: u64,
    weights: Vec<f64>,
}

impl FeatureHashModel {
    pub fn new(buckets: usize, classes: usize, seed: u64) -> Result<Self> {
        if buckets == 0 || classes == 0 {
            return Err(Error::Config(format!(
                "feature hashing needs buckets and classes, got {buckets}x{classes}"
            )));
        }
        Ok(FeatureHashModel {
            buckets,
            classes,
            seed,
            weights: vec![0.0; buckets * classes],
        })
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bucket(&self, id: u64) -> usize {
        bucket_of(self.seed, id, self.buckets)
    }
}

impl LinearModel for FeatureHashModel {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn weight(&self, class: usize, id: u64) -> f64 {
        self.weights[class * self.buckets + self.bucket(id)]
    }

    /// Nonzero buckets, keyed by bucket index.
    fn active(&self, class: usize) -> Vec<(u64, f64)> {
        let row = &self.weights[class * self.buckets..(class + 1) * self.buckets];
        let mut out: Vec<(u64, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(b, &w)| (b as u64, w))
            .collect();
        sort_by_magnitude(&mut out);
        out
    }
}

impl Learner for FeatureHashModel {
    fn apply_gradient(&mut self, class: usize, gradient: &[(u64, f64)]) -> Result<()> {
        for &(_, g) in gradient {
            finite("gradient", g)?;
        }
        let offset = class * self.buckets;
        for &(id, g) in gradient {
            let b = self.bucket(id);
            self.weights[offset + b] += g;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SparseExample;
    use crate::loss::{LossKind, LossSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn sizing_rule() {
        assert_eq!(buckets_for(47_236), 1 << 16);
        assert_eq!(buckets_for(1024), 1024);
    }

    #[test]
    fn collision_free_mapping_matches_dense_sgd() {
        let p = 10u64;
        let seed = (0..)
            .find(|&s| (0..p).map(|i| bucket_of(s, i, 64)).collect::<HashSet<_>>().len() == p as usize)
            .unwrap();
        let mut model = FeatureHashModel::new(64, 1, seed).unwrap();
        let mut dense = vec![0.0; p as usize];
        let loss = LossSpec::new(LossKind::Hinge, 0.1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let pairs: Vec<(u64, f64)> =
                (0..3).map(|_| (rng.random_range(0..p), rng.random_range(-1.0..1.0))).collect();
            let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let ex = SparseExample::from_pairs(pairs, label).unwrap();
            let s = ex.dot_with(|i| dense[i as usize]);
            if label * s < 1.0 {
                for (i, v) in ex.iter() {
                    dense[i as usize] += 0.1 * label * v;
                }
            }
            model.step(&loss, &ex).unwrap();
        }
        for i in 0..p {
            assert_eq!(model.weight(0, i), dense[i as usize]);
        }
    }

    #[test]
    fn colliding_features_share_a_weight() {
        let model_seed = 3;
        let a = 0u64;
        let b = (1..).find(|&j| bucket_of(model_seed, j, 8) == bucket_of(model_seed, a, 8)).unwrap();
        let mut model = FeatureHashModel::new(8, 1, model_seed).unwrap();
        model.apply_gradient(0, &[(a, 0.7)]).unwrap();
        let xa = SparseExample::from_pairs([(a, 2.0)], 1.0).unwrap();
        let xb = SparseExample::from_pairs([(b, 2.0)], 1.0).unwrap();
        assert_eq!(model.predict(&xa), model.predict(&xb));
        assert_eq!(model.predict(&xa), vec![1.4]);
    }
}
