use rand::Rng as _;

use super::Agent;
use crate::env::{ChainEnv, Observation, Transition};
use crate::error::Result;
use crate::rng::{rng_from_seed, Rng};

/// Fixed policies used as references and in tests.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum ScriptedAgent {
    /// Knows the chain's action mask; moves right or always left.
    Chain {
        env: ChainEnv,
        right: bool,
    },
    Random {
        num_actions: usize,
        rng: Rng,
    },
}

impl ScriptedAgent {
    pub fn chain(env: &ChainEnv, right: bool) -> Self {
        ScriptedAgent::Chain {
            env: env.clone(),
            right,
        }
    }

    pub fn random(num_actions: usize, seed: u64) -> Self {
        ScriptedAgent::Random {
            num_actions,
            rng: rng_from_seed(seed),
        }
    }
}

impl Agent for ScriptedAgent {
    fn begin_episode(&mut self) {}

    fn act(&mut self, obs: &Observation) -> usize {
        match self {
            ScriptedAgent::Chain { env, right } => {
                let n = env.size();
                let s = obs.tabular_index().unwrap_or(0);
                let r = env.right_action(s / n, s % n);
                if *right {
                    r
                } else {
                    1 - r
                }
            }
            ScriptedAgent::Random { num_actions, rng } => rng.random_range(0..*num_actions),
        }
    }

    fn update_buffer(&mut self, _tr: Transition) {}

    fn learn_from_buffer(&mut self) -> Result<()> {
        Ok(())
    }
}
