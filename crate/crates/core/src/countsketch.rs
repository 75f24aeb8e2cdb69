//! Count-Sketch over real-valued coordinates.
//!
//! A `depth x width` grid of `f64` counters. Row `j` hashes a feature id to a
//! bucket `h_j(i)` and a sign `s_j(i)`; an update adds `s_j(i) * delta` to
//! cell `(j, h_j(i))` of every row, and a query returns the median over rows
//! of the sign-corrected counters. Both operations are linear, so sketches
//! built from separate streams can be merged cell by cell.
//!
//! The identity mode is the degenerate single-row sketch with `h(i) = i mod
//! width` and a constant `+1` sign. With `width >= p` it stores the vector
//! exactly, which isolates gradient accumulation from hashing effects.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::hashing::{keyed, row_key};

const MAGIC: &[u8; 4] = b"CSK1";
const SIGN_BIT: u32 = 63;
const BUCKET_MASK: u64 = (1 << SIGN_BIT) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchMode {
    Standard,
    Identity,
}

impl SketchMode {
    fn code(self) -> u64 {
        match self {
            SketchMode::Standard => 0,
            SketchMode::Identity => 1,
        }
    }

    fn from_code(code: u64) -> Result<Self> {
        match code {
            0 => Ok(SketchMode::Standard),
            1 => Ok(SketchMode::Identity),
            other => Err(Error::Format(format!("unknown sketch mode {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SketchGeometry {
    pub depth: usize,
    pub width: usize,
    pub mode: SketchMode,
}

impl SketchGeometry {
    pub fn standard(depth: usize, width: usize) -> Self {
        SketchGeometry {
            depth,
            width,
            mode: SketchMode::Standard,
        }
    }

    /// Single-row sketch with `h(i) = i mod width`.
    pub fn identity(width: usize) -> Self {
        SketchGeometry {
            depth: 1,
            width,
            mode: SketchMode::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.depth == 0
            || self.width == 0
            || (self.mode == SketchMode::Identity && self.depth != 1);
        if bad {
            return Err(Error::InvalidGeometry {
                depth: self.depth,
                width: self.width,
            });
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.depth * self.width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountSketch {
    geometry: SketchGeometry,
    seed: u64,
    row_keys: Vec<u64>,
    counters: Vec<f64>,
}

impl CountSketch {
    pub fn new(geometry: SketchGeometry, seed: u64) -> Result<Self> {
        geometry.validate()?;
        let row_keys = (0..geometry.depth as u64).map(|j| row_key(seed, j)).collect();
        Ok(CountSketch {
            geometry,
            seed,
            row_keys,
            counters: vec![0.0; geometry.cells()],
        })
    }

    pub fn geometry(&self) -> SketchGeometry {
        self.geometry
    }

    pub fn depth(&self) -> usize {
        self.geometry.depth
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn mode(&self) -> SketchMode {
        self.geometry.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major counter grid.
    pub fn counters(&self) -> &[f64] {
        &self.counters
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.geometry.width;
        &self.counters[row * w..(row + 1) * w]
    }

    /// Bucket `h_j(index)` and sign `s_j(index)` for row `row`.
    #[inline]
    pub fn locate(&self, row: usize, index: u64) -> (usize, f64) {
        let width = self.geometry.width as u64;
        match self.geometry.mode {
            SketchMode::Identity => ((index % width) as usize, 1.0),
            SketchMode::Standard => {
                let h = keyed(self.row_keys[row], index);
                let bucket = ((h & BUCKET_MASK) % width) as usize;
                let sign = if h >> SIGN_BIT == 0 { 1.0 } else { -1.0 };
                (bucket, sign)
            }
        }
    }

    pub fn update(&mut self, index: u64, delta: f64) -> Result<()> {
        finite("sketch delta", delta)?;
        self.update_unchecked(index, delta);
        Ok(())
    }

    #[inline]
    pub(crate) fn update_unchecked(&mut self, index: u64, delta: f64) {
        let w = self.geometry.width;
        for row in 0..self.geometry.depth {
            let (bucket, sign) = self.locate(row, index);
            self.counters[row * w + bucket] += sign * delta;
        }
    }

    /// Median over rows of `s_j(index) * S(j, h_j(index))`.
    pub fn query(&self, index: u64) -> f64 {
        let w = self.geometry.width;
        let depth = self.geometry.depth;
        let estimate = |row: usize| {
            let (bucket, sign) = self.locate(row, index);
            sign * self.counters[row * w + bucket]
        };
        match depth {
            1 => estimate(0),
            2 => 0.5 * (estimate(0) + estimate(1)),
            3 => median3(estimate(0), estimate(1), estimate(2)),
            _ => {
                let mut values: Vec<f64> = (0..depth).map(estimate).collect();
                median_in_place(&mut values)
            }
        }
    }

    fn check_compatible(&self, other: &CountSketch) -> Result<()> {
        if self.geometry != other.geometry || self.seed != other.seed {
            return Err(Error::IncompatibleSketch(format!(
                "{:?}/seed {} vs {:?}/seed {}",
                self.geometry, self.seed, other.geometry, other.seed
            )));
        }
        Ok(())
    }

    /// Cell-wise sum of two sketches sharing geometry and seed.
    pub fn merge(&self, other: &CountSketch) -> Result<CountSketch> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &CountSketch) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.counters.iter_mut().zip(&other.counters) {
            *a += *b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) -> Result<()> {
        finite("scale factor", factor)?;
        self.counters.iter_mut().for_each(|c| *c *= factor);
        Ok(())
    }

    /// Scales every counter except the cells of `protected` features.
    ///
    /// Only defined for identity sketches, where cells and features are in
    /// bijection.
    pub fn scale_except<I>(&mut self, factor: f64, protected: I) -> Result<()>
    where
        I: IntoIterator<Item = u64>,
    {
        finite("scale factor", factor)?;
        if self.geometry.mode != SketchMode::Identity {
            return Err(Error::UnsupportedMode);
        }
        let width = self.geometry.width as u64;
        let saved: Vec<(usize, f64)> = protected
            .into_iter()
            .map(|i| {
                let cell = (i % width) as usize;
                (cell, self.counters[cell])
            })
            .collect();
        self.counters.iter_mut().for_each(|c| *c *= factor);
        for (cell, value) in saved {
            self.counters[cell] = value;
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.counters.iter_mut().for_each(|c| *c = 0.0);
    }

    pub fn is_zero(&self) -> bool {
        self.counters.iter().all(|&c| c == 0.0)
    }

    /// Binary layout: `CSK1`, then depth, width, mode and seed as
    /// little-endian `u64`, then the counters row-major as little-endian
    /// `f64`.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        for field in [
            self.geometry.depth as u64,
            self.geometry.width as u64,
            self.geometry.mode.code(),
            self.seed,
        ] {
            out.write_all(&field.to_le_bytes())?;
        }
        for c in &self.counters {
            out.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(36 + 8 * self.counters.len());
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad sketch magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let depth = next(&mut input)? as usize;
        let width = next(&mut input)? as usize;
        let mode = SketchMode::from_code(next(&mut input)?)?;
        let seed = next(&mut input)?;
        let mut sketch = CountSketch::new(SketchGeometry { depth, width, mode }, seed)?;
        for c in sketch.counters.iter_mut() {
            *c = f64::from_bits(next(&mut input)?);
        }
        Ok(sketch)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let sketch = Self::read_from(bytes)?;
        let expected = 36 + 8 * sketch.counters.len();
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "trailing bytes: expected {expected}, got {}",
                bytes.len()
            )));
        }
        Ok(sketch)
    }
}

#[inline]
fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

/// Median with the even-length convention of averaging the middle pair.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn replay(geometry: SketchGeometry, seed: u64, log: &[(u64, f64)]) -> Vec<f64> {
        // Recompute every cell from the update log, without going through
        // `update`.
        let probe = CountSketch::new(geometry, seed).unwrap();
        let mut cells = vec![0.0; geometry.cells()];
        for row in 0..geometry.depth {
            for &(i, delta) in log {
                let (bucket, sign) = probe.locate(row, i);
                cells[row * geometry.width + bucket] += sign * delta;
            }
        }
        cells
    }

    #[test]
    fn fresh_sketch_is_zero() {
        let s = CountSketch::new(SketchGeometry::standard(3, 16), 42).unwrap();
        assert_eq!(s.counters().len(), 48);
        assert!(s.is_zero());
        assert_eq!(s.query(123), 0.0);
    }

    #[test]
    fn identity_sketch_geometry() {
        let s = CountSketch::new(SketchGeometry::identity(1000), 0).unwrap();
        assert_eq!((s.depth(), s.width()), (1, 1000));
        assert_eq!(s.locate(0, 999), (999, 1.0));
        assert_eq!(s.locate(0, 1003), (3, 1.0));
    }

    #[test]
    fn rejects_invalid_geometry() {
        assert!(matches!(
            CountSketch::new(SketchGeometry::standard(0, 16), 1),
            Err(Error::InvalidGeometry { .. })
        ));
        assert!(CountSketch::new(SketchGeometry::standard(3, 0), 1).is_err());
        let bad_identity = SketchGeometry {
            depth: 2,
            width: 8,
            mode: SketchMode::Identity,
        };
        assert!(CountSketch::new(bad_identity, 1).is_err());
    }

    #[test]
    fn single_update_touches_one_cell_per_row() {
        let mut s = CountSketch::new(SketchGeometry::standard(3, 16), 42).unwrap();
        s.update(7, 2.5).unwrap();
        for row in 0..3 {
            let (bucket, sign) = s.locate(row, 7);
            for (cell, &value) in s.row(row).iter().enumerate() {
                let expected = if cell == bucket { sign * 2.5 } else { 0.0 };
                assert_eq!(value, expected);
            }
        }
        assert_eq!(s.query(7), 2.5);
    }

    #[test]
    fn additive_inverse_restores_zero() {
        let mut s = CountSketch::new(SketchGeometry::standard(4, 8), 3).unwrap();
        s.update(11, 1.75).unwrap();
        s.update(11, -1.75).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut s = CountSketch::new(SketchGeometry::standard(3, 8), 3).unwrap();
        assert!(matches!(
            s.update(1, f64::NAN),
            Err(Error::NumericInput { .. })
        ));
        assert!(s.scale(f64::INFINITY).is_err());
        assert!(s.is_zero());
    }

    #[test]
    fn update_log_matches_replay_oracle() {
        let geometry = SketchGeometry::standard(3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let log: Vec<(u64, f64)> = (0..50)
            .map(|_| (rng.random_range(0..10), rng.random_range(-3.0..3.0)))
            .collect();
        let mut s = CountSketch::new(geometry, 99).unwrap();
        for &(i, d) in &log {
            s.update(i, d).unwrap();
        }
        assert_eq!(s.counters(), replay(geometry, 99, &log).as_slice());
    }

    #[test]
    fn query_matches_direct_median() {
        let geometry = SketchGeometry::standard(3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = CountSketch::new(geometry, 17).unwrap();
        for _ in 0..100 {
            s.update(rng.random_range(0..20), rng.random_range(-5.0..5.0))
                .unwrap();
        }
        for i in 0..20u64 {
            let mut v: Vec<f64> = (0..3)
                .map(|r| {
                    let (b, sg) = s.locate(r, i);
                    sg * s.row(r)[b]
                })
                .collect();
            v.sort_by(f64::total_cmp);
            assert_eq!(s.query(i), v[1]);
        }
    }

    #[test]
    fn even_depth_median_averages_middle_pair() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(median_in_place(&mut v), 2.5);
        let mut s = CountSketch::new(SketchGeometry::standard(4, 1), 0).unwrap();
        s.update(0, 1.0).unwrap();
        // With width 1 every feature shares the cell; the estimate for the
        // updated feature is exact.
        assert_eq!(s.query(0), 1.0);
    }

    #[test]
    fn merge_identity_and_concatenation() {
        let g = SketchGeometry::standard(3, 16);
        let mut a = CountSketch::new(g, 1).unwrap();
        let mut b = CountSketch::new(g, 1).unwrap();
        let mut both = CountSketch::new(g, 1).unwrap();
        let fresh = CountSketch::new(g, 1).unwrap();
        for i in 0..30u64 {
            let d = (i as f64).sin();
            if i % 2 == 0 {
                a.update(i, d).unwrap();
            } else {
                b.update(i * 3, d).unwrap();
            }
        }
        for i in 0..30u64 {
            let d = (i as f64).sin();
            if i % 2 == 0 {
                both.update(i, d).unwrap();
            }
        }
        for i in 0..30u64 {
            if i % 2 == 1 {
                both.update(i * 3, (i as f64).sin()).unwrap();
            }
        }
        assert_eq!(fresh.merge(&a).unwrap().counters(), a.counters());
        // Each cell of `both` is the A-part sum plus the B-part sum, the same
        // association order as the merge.
        let merged = a.merge(&b).unwrap();
        let expected = replay(
            g,
            1,
            &(0..30u64)
                .filter(|i| i % 2 == 0)
                .map(|i| (i, (i as f64).sin()))
                .collect::<Vec<_>>(),
        );
        let expected_b = replay(
            g,
            1,
            &(0..30u64)
                .filter(|i| i % 2 == 1)
                .map(|i| (i * 3, (i as f64).sin()))
                .collect::<Vec<_>>(),
        );
        for (cell, (&ea, &eb)) in expected.iter().zip(&expected_b).enumerate() {
            assert_eq!(merged.counters()[cell], ea + eb);
        }
        for (m, s) in merged.counters().iter().zip(both.counters()) {
            assert!((m - s).abs() <= 1e-12);
        }
    }

    #[test]
    fn merge_rejects_mismatched_seed_or_geometry() {
        let a = CountSketch::new(SketchGeometry::standard(3, 16), 1).unwrap();
        let b = CountSketch::new(SketchGeometry::standard(3, 16), 2).unwrap();
        let c = CountSketch::new(SketchGeometry::standard(3, 8), 1).unwrap();
        assert!(matches!(a.merge(&b), Err(Error::IncompatibleSketch(_))));
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn scaling() {
        let mut s = CountSketch::new(SketchGeometry::standard(3, 32), 4).unwrap();
        for i in 0..40u64 {
            s.update(i, i as f64 - 20.0).unwrap();
        }
        let before = s.clone();
        s.scale(1.0).unwrap();
        assert_eq!(s, before);
        s.scale(0.9).unwrap();
        for i in 0..40u64 {
            let expected = 0.9 * before.query(i);
            assert!((s.query(i) - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
        s.scale(0.0).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn scale_except_protects_cells() {
        let mut s = CountSketch::new(SketchGeometry::identity(10), 0).unwrap();
        for i in 0..10u64 {
            s.update(i, 1.0 + i as f64).unwrap();
        }
        let before = s.clone();
        s.scale_except(0.5, 0..10).unwrap();
        assert_eq!(s, before);
        s.scale_except(0.5, [3]).unwrap();
        for i in 0..10u64 {
            let expected = if i == 3 { 4.0 } else { 0.5 * (1.0 + i as f64) };
            assert_eq!(s.query(i), expected);
        }
        let mut standard = CountSketch::new(SketchGeometry::standard(3, 8), 0).unwrap();
        assert!(matches!(
            standard.scale_except(0.5, [1]),
            Err(Error::UnsupportedMode)
        ));
    }

    #[test]
    fn deterministic_hashing() {
        let g = SketchGeometry::standard(5, 1000);
        let a = CountSketch::new(g, 77).unwrap();
        let b = CountSketch::new(g, 77).unwrap();
        for i in 0..1000u64 {
            for r in 0..5 {
                assert_eq!(a.locate(r, i), b.locate(r, i));
                assert!(a.locate(r, i).0 < 1000);
            }
        }
    }

    #[test]
    fn rejects_bad_encodings() {
        let s = CountSketch::new(SketchGeometry::standard(2, 3), 9).unwrap();
        let mut bytes = s.to_bytes();
        bytes.push(0);
        assert!(matches!(CountSketch::from_bytes(&bytes), Err(Error::Format(_))));
        let mut bytes = s.to_bytes();
        bytes[0] = b'X';
        assert!(CountSketch::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn binary_layout_round_trips(
            depth in 1usize..5,
            width in 1usize..40,
            seed in any::<u64>(),
            updates in proptest::collection::vec((0u64..500, -1e6f64..1e6), 0..60),
        ) {
            let mut s = CountSketch::new(SketchGeometry::standard(depth, width), seed).unwrap();
            for (i, d) in updates {
                s.update(i, d).unwrap();
            }
            let bytes = s.to_bytes();
            prop_assert_eq!(&bytes[..4], b"CSK1");
            prop_assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), depth as u64);
            prop_assert_eq!(bytes.len(), 36 + 8 * depth * width);
            prop_assert_eq!(CountSketch::from_bytes(&bytes).unwrap(), s);
        }

        #[test]
        fn single_nonzero_feature_is_exact(
            depth in 1usize..6,
            width in 1usize..64,
            seed in any::<u64>(),
            index in any::<u64>(),
            parts in proptest::collection::vec(-100.0f64..100.0, 1..8),
        ) {
            let mut s = CountSketch::new(SketchGeometry::standard(depth, width), seed).unwrap();
            let mut total = 0.0;
            for d in parts {
                s.update(index, d).unwrap();
                total += d;
            }
            prop_assert_eq!(s.query(index), total);
        }
    }
}
