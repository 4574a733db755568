use std::sync::Arc;

use rand::Rng as _;

use crate::env::Transition;
use crate::rng::{rng_from_seed, Rng};

/// FIFO replay memory; unbounded when `capacity` is `None`.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Arc<Transition>>,
    capacity: Option<usize>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            items: Vec::new(),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, tr: Arc<Transition>) {
        match self.capacity {
            Some(0) => {}
            Some(cap) if self.items.len() >= cap => {
                self.items[self.next] = tr;
                self.next = (self.next + 1) % cap;
            }
            _ => self.items.push(tr),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Transition>> {
        self.items.iter()
    }

    /// Uniform minibatch, drawn with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Vec<Arc<Transition>> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..batch_size)
            .map(|_| self.items[rng.random_range(0..self.items.len())].clone())
            .collect()
    }
}

/// One replay buffer per ensemble member; each incoming transition enters
/// each buffer independently with probability ½.
#[derive(Clone, Debug)]
pub struct EnsembleBuffer {
    buffers: Vec<ReplayBuffer>,
    rng: Rng,
}

impl EnsembleBuffer {
    pub fn new(k: usize, capacity: Option<usize>, seed: u64) -> Self {
        Self {
            buffers: (0..k).map(|_| ReplayBuffer::new(capacity)).collect(),
            rng: rng_from_seed(seed),
        }
    }

    /// Returns how many buffers received the transition.
    pub fn update(&mut self, tr: Transition) -> usize {
        let tr = Arc::new(tr);
        let mut copies = 0;
        for buf in &mut self.buffers {
            if self.rng.random_bool(0.5) {
                buf.push(tr.clone());
                copies += 1;
            }
        }
        copies
    }

    pub fn len(&self) -> usize {
        self.buffers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffers.is_empty()
    }

    pub fn buffer(&self, k: usize) -> &ReplayBuffer {
        &self.buffers[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Observation;

    fn tr(reward: f64) -> Transition {
        Transition {
            state: Observation::OneHot { index: 0, dim: 4 },
            action: 0,
            reward,
            next_state: None,
            t: 0,
        }
    }

    #[test]
    fn half_of_transitions_reach_each_buffer() {
        let mut eb = EnsembleBuffer::new(4, None, 7);
        let mut zero_copies = 0;
        for i in 0..10_000 {
            if eb.update(tr(i as f64)) == 0 {
                zero_copies += 1;
            }
        }
        for k in 0..4 {
            let n = eb.buffer(k).len() as i64;
            assert!((n - 5000).abs() <= 150, "buffer {k} has {n}");
        }
        // Probability 1/16 of landing nowhere.
        assert!((zero_copies as f64 / 1e4 - 0.0625).abs() < 0.01);
    }

    #[test]
    fn ring_buffer_overwrites_oldest() {
        let mut b = ReplayBuffer::new(Some(3));
        for i in 0..5 {
            b.push(Arc::new(tr(i as f64)));
        }
        let mut rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_buffer_samples_nothing() {
        let b = ReplayBuffer::new(None);
        assert!(b.sample(128, &mut rng_from_seed(0)).is_empty());
    }
}
