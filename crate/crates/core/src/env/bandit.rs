use rand::Rng as _;

use super::{check_action, Environment, Observation, Transition};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Multi-armed Bernoulli bandit exposed as one-step episodes with a constant
/// observation `[1.0]`.
#[derive(Clone, Debug)]
pub struct BernoulliBandit {
    probs: Vec<f64>,
    rng: Rng,
    finished: bool,
}

impl BernoulliBandit {
    pub fn new(probs: Vec<f64>, seed: u64) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(format!(
                "invalid arm probabilities {probs:?}"
            )));
        }
        Ok(Self {
            probs,
            rng: rng_from_seed(seed),
            finished: false,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn pull(&mut self, arm: usize) -> f64 {
        if self.rng.random_bool(self.probs[arm]) {
            1.0
        } else {
            0.0
        }
    }

    /// Expected regret of pulling `arm`.
    pub fn gap(&self, arm: usize) -> f64 {
        self.probs.iter().cloned().fold(f64::MIN, f64::max) - self.probs[arm]
    }
}

impl Environment for BernoulliBandit {
    fn num_actions(&self) -> usize {
        self.probs.len()
    }

    fn observation_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Observation {
        self.finished = false;
        Observation::Dense(vec![1.0])
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        if self.finished {
            return Err(Error::EpisodeFinished);
        }
        check_action(action, self.probs.len())?;
        self.finished = true;
        Ok(Transition {
            state: Observation::Dense(vec![1.0]),
            action,
            reward: self.pull(action),
            next_state: None,
            t: 0,
        })
    }

    fn optimal_return(&self) -> Option<f64> {
        self.probs.iter().cloned().reduce(f64::max)
    }

    fn kind(&self) -> &'static str {
        "bandit"
    }
}

/// A coin with heads probability `p`.
#[derive(Clone, Debug)]
pub struct CoinFlip {
    p: f64,
    rng: Rng,
}

impl CoinFlip {
    pub fn new(p: f64, seed: u64) -> Self {
        Self {
            p,
            rng: rng_from_seed(seed),
        }
    }

    pub fn flip(&mut self) -> bool {
        self.rng.random_bool(self.p)
    }

    /// `(heads, tails)` after `n` flips.
    pub fn counts(&mut self, n: usize) -> (u64, u64) {
        let heads = (0..n).filter(|_| self.flip()).count() as u64;
        (heads, n as u64 - heads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandit_is_one_step() {
        let mut b = BernoulliBandit::new(vec![0.5, 0.6], 1).unwrap();
        b.reset();
        assert!(b.step(1).unwrap().is_terminal());
        assert!(b.step(1).is_err());
        assert!((b.gap(0) - 0.1).abs() < 1e-12);
        assert_eq!(b.gap(1), 0.0);
    }

    #[test]
    fn coin_frequencies() {
        let (h, t) = CoinFlip::new(0.5, 3).counts(10_000);
        assert_eq!(h + t, 10_000);
        assert!((h as f64 / 1e4 - 0.5).abs() < 0.02);
    }
}
