use crate::error::{finite, Result};

/// One observation: strictly ascending feature ids with finite nonzero
/// values, plus a label.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseExample {
    indices: Vec<u64>,
    values: Vec<f64>,
    label: f64,
}

impl SparseExample {
    /// Builds an example from unordered pairs. Repeated ids are summed and
    /// entries that end up at zero are dropped.
    pub fn from_pairs<I>(pairs: I, label: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        finite("label", label)?;
        let mut pairs: Vec<(u64, f64)> = pairs.into_iter().collect();
        for &(_, v) in &pairs {
            finite("feature value", v)?;
        }
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().expect("paired with index") += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut out = SparseExample {
            indices,
            values,
            label,
        };
        out.drop_zeros();
        for &v in &out.values {
            finite("feature value", v)?;
        }
        Ok(out)
    }

    /// Dense row with every nonzero entry kept.
    pub fn from_dense(row: &[f64], label: f64) -> Result<Self> {
        Self::from_pairs(
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, &v)| (j as u64, v)),
            label,
        )
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let (indices, values) = self
            .indices
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v != 0.0)
            .map(|(&i, &v)| (i, v))
            .unzip();
        self.indices = indices;
        self.values = values;
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn set_label(&mut self, label: f64) {
        self.label = label;
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Inner product with a weight lookup.
    pub fn dot_with<F: Fn(u64) -> f64>(&self, weight: F) -> f64 {
        self.iter().map(|(i, v)| weight(i) * v).sum()
    }
}
