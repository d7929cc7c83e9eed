//! Proportional prioritized replay over a binary sum tree.
//!
//! The priority exponent is applied when priorities are written, so leaf i
//! holds `p_i^alpha` and sampling probabilities are `p_i^alpha / sum_j
//! p_j^alpha`. Parent nodes are recomputed as the exact sum of their
//! children on every write.

use crate::error::{AgentError, Result};
use crate::transition::Transition;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct SumTreeBuffer {
    capacity: usize,
    tree: Vec<f64>,
    data: Vec<Option<Transition>>,
    stamps: Vec<u64>,
    writes: u64,
    next_slot: usize,
    len: usize,
    alpha: f64,
    priority_eps: f64,
    max_priority: f64,
}

/// Sampled slots with their write stamps (for stale-update detection) and
/// normalized importance weights.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub slots: Vec<usize>,
    pub stamps: Vec<u64>,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl SumTreeBuffer {
    pub fn new(capacity: usize, alpha: f64, priority_eps: f64) -> Self {
        assert!(capacity >= 1);
        Self {
            capacity,
            tree: vec![0.0; 2 * capacity - 1],
            data: (0..capacity).map(|_| None).collect(),
            stamps: vec![0; capacity],
            writes: 0,
            next_slot: 0,
            len: 0,
            alpha,
            priority_eps,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_mass(&self) -> f64 {
        self.tree[0]
    }

    pub fn get(&self, slot: usize) -> &Transition {
        self.data[slot].as_ref().expect("sampled slot is filled")
    }

    fn leaf_index(&self, slot: usize) -> usize {
        self.capacity - 1 + slot
    }

    pub fn leaf_value(&self, slot: usize) -> f64 {
        self.tree[self.leaf_index(slot)]
    }

    fn set_leaf(&mut self, slot: usize, value: f64) {
        let mut idx = self.leaf_index(slot);
        self.tree[idx] = value;
        while idx > 0 {
            idx = (idx - 1) / 2;
            let left = 2 * idx + 1;
            let right = 2 * idx + 2;
            let rv = if right < self.tree.len() { self.tree[right] } else { 0.0 };
            self.tree[idx] = self.tree[left] + rv;
        }
    }

    /// Stores a transition at the max seen priority, overwriting the oldest
    /// slot when full.
    pub fn push(&mut self, t: Transition) {
        let slot = self.next_slot;
        self.data[slot] = Some(t);
        self.writes += 1;
        self.stamps[slot] = self.writes;
        let p = self.max_priority.powf(self.alpha);
        self.set_leaf(slot, p);
        self.next_slot = (self.next_slot + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    fn retrieve(&self, mut mass: f64) -> usize {
        let mut idx = 0;
        loop {
            let left = 2 * idx + 1;
            if left >= self.tree.len() {
                return idx - (self.capacity - 1);
            }
            if mass <= self.tree[left] || self.tree[left + 1] <= 0.0 {
                idx = left;
            } else {
                mass -= self.tree[left];
                idx = left + 1;
            }
        }
    }

    /// Stratified proportional sampling: the priority mass is split into
    /// `batch` equal segments with one uniform draw each. Importance weights
    /// are `(N * P(i))^-beta`, normalized by the batch maximum.
    pub fn sample(&self, batch: usize, beta: f64, rng: &mut ChaCha8Rng) -> Result<SampleBatch> {
        if self.len < batch || batch == 0 {
            return Err(AgentError::NotEnoughSamples {
                len: self.len,
                need: batch.max(1),
            });
        }
        let total = self.total_mass();
        if total <= 0.0 {
            return Err(AgentError::Numerical("sum tree has zero mass".into()));
        }
        let seg = total / batch as f64;
        let mut slots = Vec::with_capacity(batch);
        let mut probabilities = Vec::with_capacity(batch);
        for i in 0..batch {
            let u: f64 = rng.gen();
            let mass = (i as f64 + u) * seg;
            let slot = self.retrieve(mass.min(total * (1.0 - 1e-12)));
            slots.push(slot);
            probabilities.push(self.leaf_value(slot) / total);
        }
        let n = self.len as f64;
        let raw: Vec<f64> = probabilities.iter().map(|&p| (n * p).powf(-beta)).collect();
        let w_max = raw.iter().cloned().fold(f64::MIN, f64::max);
        let weights = raw.iter().map(|&w| w / w_max).collect();
        let stamps = slots.iter().map(|&s| self.stamps[s]).collect();
        Ok(SampleBatch {
            slots,
            stamps,
            weights,
            probabilities,
        })
    }

    /// Writes `(|td| + eps)^alpha` for every sampled slot whose stamp still
    /// matches; stale indices (overwritten slots) are skipped.
    pub fn update_priorities(&mut self, slots: &[usize], stamps: &[u64], td_errors: &[f64]) {
        for ((&slot, &stamp), &td) in slots.iter().zip(stamps).zip(td_errors) {
            if self.stamps[slot] != stamp {
                continue;
            }
            let raw = td.abs() + self.priority_eps;
            if raw > self.max_priority {
                self.max_priority = raw;
            }
            self.set_leaf(slot, raw.powf(self.alpha));
        }
    }

    /// Every internal node must equal the exact sum of its children.
    pub fn tree_is_consistent(&self) -> bool {
        for idx in 0..self.capacity - 1 {
            let left = 2 * idx + 1;
            let right = 2 * idx + 2;
            let rv = if right < self.tree.len() { self.tree[right] } else { 0.0 };
            if self.tree[idx] != self.tree[left] + rv {
                return false;
            }
        }
        true
    }
}
