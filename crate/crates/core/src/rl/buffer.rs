//! Experience replay for off-policy learning.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One transition. When the shield is on, `action` is the executed (safe)
/// action, not the proto-action. `done` marks an episode boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring with FIFO eviction and uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Experience>,
    capacity: usize,
    write: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            items: Vec::with_capacity(capacity.min(1 << 20)),
            capacity,
            write: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, exp: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(exp);
        } else {
            self.items[self.write] = exp;
        }
        self.write = (self.write + 1) % self.capacity;
    }

    /// Uniform batch of indices into the stored items.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        (0..batch).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    pub fn get(&self, idx: usize) -> &Experience {
        &self.items[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(tag: f64) -> Experience {
        Experience {
            state: vec![tag],
            action: vec![tag],
            reward: tag,
            next_state: vec![tag],
            done: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(exp(i as f64));
        }
        assert_eq!(buf.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| buf.get(i).reward).collect();
        // slots hold 3, 4, 2 after wrapping; the oldest (0, 1) are gone
        assert!(rewards.contains(&2.0) && rewards.contains(&3.0) && rewards.contains(&4.0));
    }

    #[test]
    fn samples_come_from_store() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..7 {
            buf.push(exp(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for idx in buf.sample_indices(64, &mut rng) {
            assert!(idx < buf.len());
        }
    }
}
