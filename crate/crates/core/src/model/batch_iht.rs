use super::{hard_threshold, LinearModel, Learner};
use crate::error::{finite, Error, Result};
use crate::hashing::IdMap;
use crate::topk::TopKHeap;

/// Accumulate, sort and prune: steps collect in a side buffer of at most
/// `budget` features per class; each flush adds the buffer to the active
/// weights and keeps the top-k.
#[derive(Debug, Clone)]
pub struct BatchIhtModel {
    heaps: Vec<TopKHeap>,
    buffers: Vec<IdMap<f64>>,
    budget: usize,
    flushes: u64,
}

impl BatchIhtModel {
    pub fn new(classes: usize, top_k: usize, budget: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Config("model needs at least one class".into()));
        }
        if budget < top_k || budget == 0 {
            return Err(Error::InvalidBudget { budget, k: top_k });
        }
        Ok(BatchIhtModel {
            heaps: (0..classes).map(|_| TopKHeap::new(top_k)).collect(),
            buffers: (0..classes).map(|_| IdMap::default()).collect(),
            budget,
            flushes: 0,
        })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Number of sort-prune passes so far.
    pub fn flushes(&self) -> u64 {
        self.flushes
    }

    pub fn buffered(&self, class: usize) -> usize {
        self.buffers[class].len()
    }

    fn flush(&mut self, class: usize) -> Result<()> {
        let buffer = &mut self.buffers[class];
        if buffer.is_empty() {
            return Ok(());
        }
        let heap = &mut self.heaps[class];
        let mut merged: Vec<(u64, f64)> = heap.iter().collect();
        for entry in merged.iter_mut() {
            if let Some(g) = buffer.remove(&entry.0) {
                entry.1 += g;
            }
        }
        merged.extend(buffer.drain());
        heap.clear();
        for (id, w) in hard_threshold(&merged, heap.capacity()) {
            heap.offer(id, w)?;
        }
        self.flushes += 1;
        Ok(())
    }
}

impl LinearModel for BatchIhtModel {
    fn num_classes(&self) -> usize {
        self.heaps.len()
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

impl Learner for BatchIhtModel {
    fn apply_gradient(&mut self, class: usize, gradient: &[(u64, f64)]) -> Result<()> {
        for &(_, g) in gradient {
            finite("gradient", g)?;
        }
        for &(id, g) in gradient {
            let buffer = &self.buffers[class];
            if !buffer.contains_key(&id) && buffer.len() == self.budget {
                self.flush(class)?;
            }
            *self.buffers[class].entry(id).or_insert(0.0) += g;
        }
        Ok(())
    }

    fn end_epoch(&mut self) -> Result<()> {
        for class in 0..self.heaps.len() {
            self.flush(class)?;
        }
        Ok(())
    }
}
