use rand::Rng as _;

use super::{check_action, Environment, Observation, Transition};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// An `N × N` grid the agent falls through one row per step.
///
/// Each cell carries a mask bit; when set, raw actions 0 and 1 swap meaning
/// (1 is "right" on unmasked cells). Moving right costs `0.01/N`, except from
/// the right-most column where it pays 1. Moving left is free. The episode
/// ends after `N` steps.
#[derive(Clone, Debug)]
pub struct ChainEnv {
    size: usize,
    mask: Vec<bool>,
    row: usize,
    col: usize,
    finished: bool,
}

impl ChainEnv {
    /// Mask entries drawn iid `Bernoulli(0.5)` from `seed`.
    pub fn new(size: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let mask = (0..size * size).map(|_| rng.random_bool(0.5)).collect();
        Self::with_mask(size, mask)
    }

    pub fn with_mask(size: usize, mask: Vec<bool>) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidArgument(format!(
                "chain size must be >= 2, got {size}"
            )));
        }
        if mask.len() != size * size {
            return Err(Error::DimensionMismatch {
                context: "chain mask",
                expected: size * size,
                got: mask.len(),
            });
        }
        Ok(Self {
            size,
            mask,
            row: 0,
            col: 0,
            finished: false,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mask(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.size + col]
    }

    pub fn position(&self) -> (usize, usize) {
        (self.row, self.col)
    }

    pub fn move_cost(&self) -> f64 {
        0.01 / self.size as f64
    }

    /// The raw action that moves right from `(row, col)`.
    pub fn right_action(&self, row: usize, col: usize) -> usize {
        if self.mask(row, col) {
            0
        } else {
            1
        }
    }

    /// `1 − 0.01·(N−1)/N`.
    pub fn optimal_return_for(size: usize) -> f64 {
        1.0 - 0.01 * (size as f64 - 1.0) / size as f64
    }

    fn observation(&self) -> Observation {
        Observation::OneHot {
            index: self.row * self.size + self.col,
            dim: self.size * self.size,
        }
    }
}

impl Environment for ChainEnv {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_dim(&self) -> usize {
        self.size * self.size
    }

    fn reset(&mut self) -> Observation {
        self.row = 0;
        self.col = 0;
        self.finished = false;
        self.observation()
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        if self.finished {
            return Err(Error::EpisodeFinished);
        }
        check_action(action, 2)?;
        let state = self.observation();
        let t = self.row;
        let right = (action == 1) != self.mask(self.row, self.col);
        let reward = if !right {
            0.0
        } else if self.col == self.size - 1 {
            1.0
        } else {
            -self.move_cost()
        };
        self.col = if right {
            (self.col + 1).min(self.size - 1)
        } else {
            self.col.saturating_sub(1)
        };
        self.row += 1;
        let next_state = if self.row == self.size {
            self.finished = true;
            None
        } else {
            Some(self.observation())
        };
        Ok(Transition {
            state,
            action,
            reward,
            next_state,
            t,
        })
    }

    fn optimal_return(&self) -> Option<f64> {
        Some(Self::optimal_return_for(self.size))
    }

    fn kind(&self) -> &'static str {
        "chain"
    }

    fn is_tabular(&self) -> bool {
        true
    }

    fn as_chain(&self) -> Option<&ChainEnv> {
        Some(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rollout(env: &mut ChainEnv, mut policy: impl FnMut(&ChainEnv) -> usize) -> (f64, usize) {
        env.reset();
        let (mut ret, mut steps) = (0.0, 0);
        loop {
            let a = policy(env);
            let tr = env.step(a).unwrap();
            ret += tr.reward;
            steps += 1;
            let (r, c) = env.position();
            assert!(c <= r, "column {c} beyond row {r}");
            if tr.is_terminal() {
                return (ret, steps);
            }
        }
    }

    #[test]
    fn observation_shape_and_reset() {
        let mut env = ChainEnv::new(5, 1).unwrap();
        assert_eq!(env.observation_dim(), 25);
        let mut env3 = ChainEnv::new(3, 1).unwrap();
        assert_eq!(env3.reset(), Observation::OneHot { index: 0, dim: 9 });
        assert_eq!(env3.reset().to_dense()[0], 1.0);
        assert_eq!(env.reset(), env.reset());
    }

    #[test]
    fn mask_is_deterministic_in_seed() {
        let a = ChainEnv::new(8, 42).unwrap();
        let b = ChainEnv::new(8, 42).unwrap();
        assert_eq!(a.mask, b.mask);
        assert_ne!(a.mask, ChainEnv::new(8, 43).unwrap().mask);
    }

    #[test]
    fn always_right_earns_optimal_return() {
        for n in [2, 5, 10, 17] {
            let mut env = ChainEnv::new(n, n as u64).unwrap();
            let (ret, steps) = rollout(&mut env, |e| {
                let (r, c) = e.position();
                e.right_action(r, c)
            });
            assert_eq!(steps, n);
            assert!((ret - ChainEnv::optimal_return_for(n)).abs() < 1e-12);
        }
        assert!((ChainEnv::optimal_return_for(5) - 0.992).abs() < 1e-12);
    }

    #[test]
    fn always_left_earns_zero() {
        let mut env = ChainEnv::new(6, 3).unwrap();
        let (ret, steps) = rollout(&mut env, |e| {
            let (r, c) = e.position();
            1 - e.right_action(r, c)
        });
        assert_eq!((ret, steps), (0.0, 6));
    }

    #[test]
    fn reward_only_on_last_step() {
        let mut env = ChainEnv::new(4, 9).unwrap();
        env.reset();
        for step in 0..4 {
            let (r, c) = env.position();
            let tr = env.step(env.right_action(r, c)).unwrap();
            assert_eq!(tr.t, step);
            assert_eq!(tr.reward == 1.0, step == 3);
        }
    }

    #[test]
    fn stepping_finished_episode_fails() {
        let mut env = ChainEnv::new(2, 0).unwrap();
        env.reset();
        env.step(0).unwrap();
        env.step(0).unwrap();
        assert!(matches!(env.step(0), Err(Error::EpisodeFinished)));
        env.reset();
        assert!(matches!(env.step(2), Err(Error::InvalidAction { .. })));
    }

    #[test]
    fn left_at_column_zero_stays() {
        let mut env = ChainEnv::with_mask(3, vec![false; 9]).unwrap();
        env.reset();
        let tr = env.step(0).unwrap();
        assert_eq!(tr.reward, 0.0);
        assert_eq!(env.position(), (1, 0));
    }
}
