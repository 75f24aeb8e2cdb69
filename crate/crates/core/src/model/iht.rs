use super::{LinearModel, Learner};
use crate::error::{finite, Error, Result};
use crate::topk::TopKHeap;

/// Stochastic iterative hard thresholding: the heap is the thresholding
/// operator. A feature that falls out of the heap restarts from zero.
#[derive(Debug, Clone)]
pub struct IhtModel {
    heaps: Vec<TopKHeap>,
    untracked: Vec<(u64, f64)>,
}

impl IhtModel {
    pub fn new(classes: usize, top_k: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Config("model needs at least one class".into()));
        }
        Ok(IhtModel {
            heaps: (0..classes).map(|_| TopKHeap::new(top_k)).collect(),
            untracked: Vec::new(),
        })
    }

    pub fn top_k(&self) -> usize {
        self.heaps[0].capacity()
    }

    pub fn heap(&self, class: usize) -> &TopKHeap {
        &self.heaps[class]
    }
}

impl LinearModel for IhtModel {
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

impl Learner for IhtModel {
    fn apply_gradient(&mut self, class: usize, gradient: &[(u64, f64)]) -> Result<()> {
        for &(_, g) in gradient {
            finite("gradient", g)?;
        }
        let heap = &mut self.heaps[class];
        self.untracked.clear();
        for &(id, g) in gradient {
            match heap.get(id) {
                Some(w) => {
                    heap.offer(id, w + g)?;
                }
                None => self.untracked.push((id, g)),
            }
        }
        for &(id, g) in &self.untracked {
            if g != 0.0 {
                heap.offer(id, g)?;
            }
        }
        Ok(())
    }
}
