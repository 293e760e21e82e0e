use std::collections::VecDeque;

use rand::Rng;

use super::TrainError;
use crate::track::FeatureVector;

/// One experience tuple. `next` is ignored when `terminal` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTransition {
    pub features: FeatureVector,
    pub action: usize,
    pub reward: f64,
    pub next: FeatureVector,
    pub terminal: bool,
}

/// Bounded FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<StoredTransition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: StoredTransition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &StoredTransition> {
        self.items.iter()
    }

    /// Uniform draw with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&StoredTransition>, TrainError> {
        if self.items.len() < batch_size.max(1) {
            return Err(TrainError::BufferUnderfilled {
                have: self.items.len(),
                need: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }
}
