//! Bounded FIFO experience store.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::world::ControlPrimitive;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: ControlPrimitive,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub terminal: bool,
}

/// Ring buffer: once full, each push evicts the oldest transition.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity.min(1 << 20)), cursor: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Vec<Transition> {
        (0..batch_size).map(|_| self.items[rng.gen_range(0..self.items.len())].clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(reward: f64) -> Transition {
        Transition {
            observation: vec![reward],
            action: ControlPrimitive::MoveForward,
            reward,
            next_observation: vec![reward],
            terminal: false,
        }
    }

    #[test]
    fn never_exceeds_capacity_and_evicts_fifo() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(i as f64));
            assert!(buf.len() <= 3);
        }
        let rewards: Vec<f64> = buf.iter().map(|x| x.reward).collect();
        // 0 and 1 were evicted first.
        assert!(!rewards.contains(&0.0));
        assert!(!rewards.contains(&1.0));
        assert_eq!(rewards.len(), 3);
    }
}
