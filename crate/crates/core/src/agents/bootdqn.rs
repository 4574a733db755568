use rand::Rng as _;

use super::qnet::{argmax, QLearner, TdSettings};
use super::{Agent, AgentConfig, AgentKind, EnsembleBuffer};
use crate::ensemble::EnsembleConfig;
use crate::env::{Environment, Observation, Transition};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// K Q-networks, each trained on its own half-sampled replay. Each episode
/// follows the greedy policy of one uniformly drawn member.
#[derive(Clone, Debug)]
pub struct BootDqnAgent {
    learners: Vec<QLearner>,
    buffer: EnsembleBuffer,
    settings: TdSettings,
    active: usize,
    select_rng: Rng,
}

impl BootDqnAgent {
    pub fn new(config: &AgentConfig, env: &dyn Environment, seed: u64) -> Result<Self> {
        if !config.kind.is_ensemble() {
            return Err(Error::Config(format!(
                "{} is not an ensemble agent",
                config.kind.name()
            )));
        }
        let members = EnsembleConfig {
            hidden: config.hidden.clone(),
            prior_scale: config.effective_beta().unwrap_or(0.0),
            prior_bias_range: config.prior_bias_range,
            anchor_lambda: if config.kind == AgentKind::Bsr {
                config.lambda_reg
            } else {
                0.0
            },
            adam: config.adam,
            seed,
            ..EnsembleConfig::default()
        };
        let learners = (0..config.ensemble_size)
            .map(|k| {
                let m = members.build_member(k, env.observation_dim(), env.num_actions())?;
                Ok(QLearner::new(m, derive_seed(seed, k as u64, "learn")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            learners,
            buffer: EnsembleBuffer::new(
                config.ensemble_size,
                config.buffer_capacity,
                derive_seed(seed, 0, "buffer"),
            ),
            settings: config.td_settings(),
            active: 0,
            select_rng: rng_from_seed(derive_seed(seed, 0, "select")),
        })
    }

    pub fn ensemble_size(&self) -> usize {
        self.learners.len()
    }

    pub fn learners(&self) -> &[QLearner] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [QLearner] {
        &mut self.learners
    }

    pub fn buffer(&self) -> &EnsembleBuffer {
        &self.buffer
    }

    pub fn member_q_values(&mut self, k: usize, obs: &Observation) -> Vec<f64> {
        self.learners[k].q_values(obs, None).to_vec()
    }
}

impl Agent for BootDqnAgent {
    fn begin_episode(&mut self) {
        self.active = self.select_rng.random_range(0..self.learners.len());
    }

    fn act(&mut self, obs: &Observation) -> usize {
        argmax(self.learners[self.active].q_values(obs, None))
    }

    fn update_buffer(&mut self, tr: Transition) {
        self.buffer.update(tr);
    }

    fn learn_from_buffer(&mut self) -> Result<()> {
        let settings = self.settings;
        for (k, learner) in self.learners.iter_mut().enumerate() {
            let buf = self.buffer.buffer(k);
            if buf.is_empty() {
                continue;
            }
            learner
                .learn(
                    &settings,
                    buf.len(),
                    |rng| buf.sample(settings.batch_size, rng),
                    &|_| 0.0,
                )
                .map_err(|e| Error::Member {
                    index: k,
                    source: Box::new(e),
                })?;
        }
        Ok(())
    }

    fn active_member(&self) -> Option<usize> {
        Some(self.active)
    }
}
