use rand::Rng;

use crate::error::{Error, Result};

/// Fixed-capacity ring; the oldest item is overwritten first.
#[derive(Clone, Debug)]
pub struct UniformBuffer<I> {
    capacity: usize,
    items: Vec<I>,
    next: usize,
    total_pushed: u64,
}

impl<I> UniformBuffer<I> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("buffer_size", "must be positive"));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            total_pushed: 0,
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

    pub fn total_pushed(&self) -> u64 {
        self.total_pushed
    }

    pub fn push(&mut self, item: I) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        self.total_pushed += 1;
    }

    /// Items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &I> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        if self.items.len() < batch_size {
            return Err(Error::Underfull(format!(
                "{} stored, batch of {batch_size} requested",
                self.items.len()
            )));
        }
        Ok((0..batch_size).map(|_| rng.gen_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&I>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
