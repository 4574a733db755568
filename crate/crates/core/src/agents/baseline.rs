use std::collections::HashMap;

use rand::Rng as _;

use super::qnet::{argmax, QLearner, TdSettings};
use super::{Agent, AgentConfig, AgentKind, ReplayBuffer};
use crate::ensemble::EnsembleConfig;
use crate::env::{Environment, Observation, Transition};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exploration {
    /// `ε` decays linearly from `eps0` to 0 over `anneal_episodes`.
    EpsGreedy { eps0: f64, anneal_episodes: u64 },
    /// Act greedily under a dropout mask resampled every step.
    Dropout { keep_probability: f64 },
    /// Add `bonus / √max(1, N(s))` to rewards, `N` the exact visit count.
    Ucb { bonus: f64 },
}

/// Single Q-network agent with one replay buffer.
#[derive(Clone, Debug)]
pub struct BaselineAgent {
    learner: QLearner,
    buffer: ReplayBuffer,
    settings: TdSettings,
    exploration: Exploration,
    counts: HashMap<usize, u64>,
    episodes_started: u64,
    rng: Rng,
}

impl BaselineAgent {
    pub fn new(config: &AgentConfig, env: &dyn Environment, seed: u64) -> Result<Self> {
        let exploration = match config.kind {
            AgentKind::EpsGreedy => Exploration::EpsGreedy {
                eps0: config.eps0,
                anneal_episodes: config.anneal_episodes,
            },
            AgentKind::Dropout => Exploration::Dropout {
                keep_probability: config.keep_probability,
            },
            AgentKind::Ucb => {
                if !env.is_tabular() {
                    return Err(Error::Config(
                        "ucb agent needs tabular (one-hot) states".into(),
                    ));
                }
                Exploration::Ucb {
                    bonus: config.ucb_bonus,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "{} is not a baseline agent",
                    other.name()
                )))
            }
        };
        let member = EnsembleConfig {
            hidden: config.hidden.clone(),
            prior_scale: 0.0,
            adam: config.adam,
            seed,
            ..EnsembleConfig::default()
        }
        .build_member(0, env.observation_dim(), env.num_actions())?;
        Ok(Self {
            learner: QLearner::new(member, derive_seed(seed, 0, "learn")),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            settings: config.td_settings(),
            exploration,
            counts: HashMap::new(),
            episodes_started: 0,
            rng: rng_from_seed(derive_seed(seed, 0, "explore")),
        })
    }

    pub fn exploration(&self) -> Exploration {
        self.exploration
    }

    /// Current exploration rate for ε-greedy, counting episodes begun so far.
    pub fn epsilon(&self) -> Option<f64> {
        match self.exploration {
            Exploration::EpsGreedy {
                eps0,
                anneal_episodes,
            } => {
                let done = self.episodes_started.saturating_sub(1) as f64;
                Some(eps0 * (1.0 - done / anneal_episodes.max(1) as f64).max(0.0))
            }
            _ => None,
        }
    }

    pub fn visit_count(&self, state: usize) -> u64 {
        self.counts.get(&state).copied().unwrap_or(0)
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn learner(&self) -> &QLearner {
        &self.learner
    }

    pub fn learner_mut(&mut self) -> &mut QLearner {
        &mut self.learner
    }
}

impl Agent for BaselineAgent {
    fn begin_episode(&mut self) {
        self.episodes_started += 1;
    }

    fn act(&mut self, obs: &Observation) -> usize {
        match self.exploration {
            Exploration::EpsGreedy { .. } => {
                let eps = self.epsilon().unwrap_or(0.0);
                if eps > 0.0 && self.rng.random_bool(eps) {
                    let a = self.learner.member.net.output_dim();
                    return self.rng.random_range(0..a);
                }
                argmax(self.learner.q_values(obs, None))
            }
            Exploration::Dropout { keep_probability } => {
                let mask = self.learner.sample_mask(keep_probability);
                argmax(self.learner.q_values(obs, Some(&mask)))
            }
            // The count bonus depends on the state only, so it cannot change
            // the argmax over actions here; it acts through the TD targets.
            Exploration::Ucb { .. } => argmax(self.learner.q_values(obs, None)),
        }
    }

    fn update_buffer(&mut self, tr: Transition) {
        if let Some(s) = tr.state.tabular_index() {
            *self.counts.entry(s).or_insert(0) += 1;
        }
        self.buffer.push(tr.into());
    }

    fn learn_from_buffer(&mut self) -> Result<()> {
        if self.buffer.is_empty() {
            return Ok(());
        }
        let settings = self.settings;
        let buf = &self.buffer;
        let counts = &self.counts;
        match self.exploration {
            Exploration::Ucb { bonus } => {
                let bonus_fn = |tr: &Transition| {
                    let n = tr
                        .state
                        .tabular_index()
                        .and_then(|s| counts.get(&s))
                        .copied()
                        .unwrap_or(0);
                    bonus / (n.max(1) as f64).sqrt()
                };
                self.learner.learn(
                    &settings,
                    buf.len(),
                    |rng| buf.sample(settings.batch_size, rng),
                    &bonus_fn,
                )?;
            }
            _ => {
                self.learner.learn(
                    &settings,
                    buf.len(),
                    |rng| buf.sample(settings.batch_size, rng),
                    &|_| 0.0,
                )?;
            }
        }
        Ok(())
    }
}
