use std::collections::VecDeque;

use gsea_core::rng::Rng;
use gsea_core::{Error, Result};
use rand::Rng as _;

/// Bounded FIFO store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
    inserted: u64,
}

impl<T> ReplayBuffer<T> {
    pub const DEFAULT_CAPACITY: usize = 10_000;

    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
        })
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

    /// Total number of pushes ever made.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Adds an item, evicting the oldest when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
        self.inserted += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `count` items drawn uniformly with replacement.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::State("replay buffer is empty".into()));
        }
        Ok((0..count)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }

    pub fn make_contiguous(&mut self) -> &[T] {
        self.items.make_contiguous()
    }
}
