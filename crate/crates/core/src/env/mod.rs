//! Seedable episodic environments.
//!
//! All environments follow the same loop: `reset` yields the first
//! observation, then `step` is called until it returns a transition whose
//! `next_state` is `None`.

mod bandit;
mod cartpole;
mod chain;

pub use bandit::{BernoulliBandit, CoinFlip};
pub use cartpole::{CartpoleParams, CartpoleSwingup};
pub use chain::ChainEnv;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Features;

/// An observation, stored compactly when it is one-hot.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Dense(Vec<f64>),
    OneHot { index: usize, dim: usize },
}

impl Observation {
    pub fn features(&self) -> Features<'_> {
        match self {
            Observation::Dense(x) => Features::Dense(x),
            Observation::OneHot { index, dim } => Features::OneHot {
                index: *index,
                dim: *dim,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Observation::Dense(x) => x.len(),
            Observation::OneHot { dim, .. } => *dim,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Observation::Dense(x) => x.clone(),
            Observation::OneHot { index, dim } => {
                let mut v = vec![0.0; *dim];
                v[*index] = 1.0;
                v
            }
        }
    }

    /// Index of the hot entry for tabular observations.
    pub fn tabular_index(&self) -> Option<usize> {
        match self {
            Observation::OneHot { index, .. } => Some(*index),
            Observation::Dense(_) => None,
        }
    }
}

/// `(s_t, a_t, r_t, s'_t, t)`; `next_state` is `None` on the final step.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Option<Observation>,
    pub t: usize,
}

impl Transition {
    pub fn is_terminal(&self) -> bool {
        self.next_state.is_none()
    }
}

pub trait Environment: Send {
    fn num_actions(&self) -> usize;

    fn observation_dim(&self) -> usize;

    fn reset(&mut self) -> Observation;

    /// Advance one step. Stepping a finished episode is an error.
    fn step(&mut self, action: usize) -> Result<Transition>;

    /// Return of an optimal policy, when known exactly.
    fn optimal_return(&self) -> Option<f64> {
        None
    }

    fn kind(&self) -> &'static str;

    /// Whether observations are one-hot encodings of a finite state set.
    fn is_tabular(&self) -> bool {
        false
    }

    fn as_chain(&self) -> Option<&ChainEnv> {
        None
    }
}

/// Serializable environment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Chain {
        size: usize,
    },
    Cartpole {
        #[serde(default)]
        physics: CartpoleParams,
    },
    Bandit {
        probs: Vec<f64>,
    },
}

impl EnvSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvSpec::Chain { .. } => "chain",
            EnvSpec::Cartpole { .. } => "cartpole",
            EnvSpec::Bandit { .. } => "bandit",
        }
    }

    /// Problem scale: chain size or bandit arm count.
    pub fn scale(&self) -> Option<usize> {
        match self {
            EnvSpec::Chain { size } => Some(*size),
            EnvSpec::Cartpole { .. } => None,
            EnvSpec::Bandit { probs } => Some(probs.len()),
        }
    }
}

pub fn make_env(spec: &EnvSpec, seed: u64) -> Result<Box<dyn Environment>> {
    Ok(match spec {
        EnvSpec::Chain { size } => Box::new(ChainEnv::new(*size, seed)?),
        EnvSpec::Cartpole { physics } => Box::new(CartpoleSwingup::new(physics.clone(), seed)?),
        EnvSpec::Bandit { probs } => Box::new(BernoulliBandit::new(probs.clone(), seed)?),
    })
}

pub(crate) fn check_action(action: usize, num_actions: usize) -> Result<()> {
    if action < num_actions {
        Ok(())
    } else {
        Err(Error::InvalidAction {
            action,
            num_actions,
        })
    }
}
