//! Bounded heavy-hitter tracker.
//!
//! A capacity-`k` indexed min-heap ordered by `|key|`, where `key` is the
//! weight an entry had when it was last repositioned. With a lazy threshold
//! `eps > 0`, an update only moves an entry when its weight drifted at least
//! `eps` away from its key; the stored weight is always current. With
//! `eps = 0` the heap is exact.
//!
//! Ties on equal magnitude are broken toward keeping the smaller feature id:
//! among equal `|key|` the larger id sits closer to the root, and a full heap
//! rejects a challenger that does not strictly beat the minimum.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use crate::error::{finite, Error, Result};
use crate::hashing::IdMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    Inserted,
    Updated,
    Rejected,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    id: u64,
    weight: f64,
    key: f64,
}

impl Slot {
    /// `true` when `self` belongs closer to the root than `other`.
    #[inline]
    fn before(&self, other: &Slot) -> bool {
        match self.key.abs().total_cmp(&other.key.abs()) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.id > other.id,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TopKHeap {
    capacity: usize,
    lazy_threshold: f64,
    slots: Vec<Slot>,
    positions: IdMap<usize>,
    insertions: u64,
    evictions: u64,
    repositions: u64,
}

impl TopKHeap {
    pub fn new(capacity: usize) -> Self {
        TopKHeap {
            capacity,
            lazy_threshold: 0.0,
            slots: Vec::with_capacity(capacity.min(1 << 20)),
            positions: IdMap::default(),
            insertions: 0,
            evictions: 0,
            repositions: 0,
        }
    }

    pub fn with_lazy_threshold(capacity: usize, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::NumericInput {
                what: "lazy threshold",
                value: threshold,
            });
        }
        let mut heap = Self::new(capacity);
        heap.lazy_threshold = threshold;
        Ok(heap)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn lazy_threshold(&self) -> f64 {
        self.lazy_threshold
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    pub fn contains(&self, id: u64) -> bool {
        self.positions.contains_key(&id)
    }

    pub fn get(&self, id: u64) -> Option<f64> {
        self.positions.get(&id).map(|&p| self.slots[p].weight)
    }

    /// Total number of successful insertions.
    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    /// Total number of entries removed by eviction.
    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    /// Number of heap repositionings caused by updates of tracked entries.
    pub fn repositions(&self) -> u64 {
        self.repositions
    }

    pub fn offer(&mut self, id: u64, weight: f64) -> Result<Offer> {
        finite("heap weight", weight)?;
        if let Some(&pos) = self.positions.get(&id) {
            let slot = &mut self.slots[pos];
            slot.weight = weight;
            if (weight - slot.key).abs() >= self.lazy_threshold {
                slot.key = weight;
                self.repositions += 1;
                self.restore(pos);
            }
            return Ok(Offer::Updated);
        }
        if self.capacity == 0 {
            return Ok(Offer::Rejected);
        }
        let slot = Slot {
            id,
            weight,
            key: weight,
        };
        if self.slots.len() < self.capacity {
            self.slots.push(slot);
            let pos = self.slots.len() - 1;
            self.positions.insert(id, pos);
            self.sift_up(pos);
        } else {
            if weight.abs() <= self.slots[0].weight.abs() {
                return Ok(Offer::Rejected);
            }
            let old = self.slots[0].id;
            self.positions.remove(&old);
            self.evictions += 1;
            self.slots[0] = slot;
            self.positions.insert(id, 0);
            self.sift_down(0);
        }
        self.insertions += 1;
        Ok(Offer::Inserted)
    }

    /// Current minimum as seen by the heap order.
    pub fn peek_min(&self) -> Option<(u64, f64)> {
        self.slots.first().map(|s| (s.id, s.weight))
    }

    pub fn evict_min(&mut self) -> Result<(u64, f64)> {
        if self.slots.is_empty() {
            return Err(Error::EmptyHeap);
        }
        let root = self.slots.swap_remove(0);
        self.positions.remove(&root.id);
        if !self.slots.is_empty() {
            self.positions.insert(self.slots[0].id, 0);
            self.sift_down(0);
        }
        self.evictions += 1;
        Ok((root.id, root.weight))
    }

    /// Removes a tracked entry, returning its weight.
    pub fn remove(&mut self, id: u64) -> Option<f64> {
        let pos = self.positions.remove(&id)?;
        let removed = self.slots.swap_remove(pos);
        if pos < self.slots.len() {
            self.positions.insert(self.slots[pos].id, pos);
            self.restore(pos);
        }
        Some(removed.weight)
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.positions.clear();
    }

    /// Entries in heap order (unspecified ranking).
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.slots.iter().map(|s| (s.id, s.weight))
    }

    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.slots.iter().map(|s| s.id)
    }

    /// Snapshot sorted by descending `|weight|`, ties by ascending id.
    pub fn top(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = self.iter().collect();
        sort_by_magnitude(&mut out);
        out
    }

    /// Largest `|key - weight|` over all entries. Zero for an eager heap.
    pub fn max_staleness(&self) -> f64 {
        self.slots
            .iter()
            .map(|s| (s.key - s.weight).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the heap order on keys and the position index.
    pub fn check_invariants(&self) -> bool {
        let ordered = (1..self.slots.len()).all(|i| !self.slots[i].before(&self.slots[(i - 1) / 2]));
        let indexed = self.positions.len() == self.slots.len()
            && self
                .slots
                .iter()
                .enumerate()
                .all(|(i, s)| self.positions.get(&s.id) == Some(&i));
        let stale_ok = self
            .slots
            .iter()
            .all(|s| (s.key - s.weight).abs() < self.lazy_threshold || s.key == s.weight);
        ordered && indexed && self.slots.len() <= self.capacity && stale_ok
    }

    /// One `feature_id<TAB>weight` line per entry, descending `|weight|`.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, w) in self.top() {
            writeln!(out, "{id}\t{w}")?;
        }
        Ok(())
    }

    /// Reads lines written by [`write_snapshot`](Self::write_snapshot) into an
    /// eager heap of the given capacity.
    pub fn read_snapshot<R: BufRead>(input: R, capacity: usize) -> Result<Self> {
        let mut heap = Self::new(capacity);
        for (line_no, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, w) = parse_snapshot_line(&line).map_err(|e| Error::Record {
                record: line_no + 1,
                source: Box::new(e),
            })?;
            heap.offer(id, w)?;
        }
        Ok(heap)
    }

    #[inline]
    fn restore(&mut self, pos: usize) {
        if pos > 0 && self.slots[pos].before(&self.slots[(pos - 1) / 2]) {
            self.sift_up(pos);
        } else {
            self.sift_down(pos);
        }
    }

    fn sift_up(&mut self, mut pos: usize) {
        while pos > 0 {
            let parent = (pos - 1) / 2;
            if !self.slots[pos].before(&self.slots[parent]) {
                break;
            }
            self.swap(pos, parent);
            pos = parent;
        }
    }

    fn sift_down(&mut self, mut pos: usize) {
        let n = self.slots.len();
        loop {
            let left = 2 * pos + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n && self.slots[right].before(&self.slots[left]) {
                right
            } else {
                left
            };
            if !self.slots[child].before(&self.slots[pos]) {
                break;
            }
            self.swap(pos, child);
            pos = child;
        }
    }

    #[inline]
    fn swap(&mut self, a: usize, b: usize) {
        self.slots.swap(a, b);
        self.positions.insert(self.slots[a].id, a);
        self.positions.insert(self.slots[b].id, b);
    }
}

pub(crate) fn parse_snapshot_line(line: &str) -> Result<(u64, f64)> {
    let mut parts = line.split('\t');
    let (Some(id), Some(w), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Parse {
            offset: 0,
            message: format!("expected `id<TAB>weight`, got {line:?}"),
        });
    };
    let id = id.trim().parse::<u64>().map_err(|e| Error::Parse {
        offset: 0,
        message: format!("feature id: {e}"),
    })?;
    let w = w.trim().parse::<f64>().map_err(|e| Error::Parse {
        offset: line.find('\t').map_or(0, |o| o + 1),
        message: format!("weight: {e}"),
    })?;
    Ok((id, w))
}

/// Sorts by descending magnitude, then ascending id.
pub fn sort_by_magnitude(entries: &mut [(u64, f64)]) {
    entries.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
}
