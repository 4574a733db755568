//! Value-based exploration agents: bootstrapped DQN with optional additive
//! prior (BSP) or anchor regularization (BSR), and single-network baselines
//! (ε-greedy, dropout, count-based UCB), plus scripted reference policies.

mod baseline;
mod bootdqn;
mod buffer;
mod qnet;
mod scripted;

pub use baseline::{BaselineAgent, Exploration};
pub use bootdqn::BootDqnAgent;
pub use buffer::{EnsembleBuffer, ReplayBuffer};
pub use qnet::{argmax, td_target, QLearner, TdSettings};
pub use scripted::ScriptedAgent;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Observation, Transition};
use crate::error::{Error, Result};
use crate::nn::AdamConfig;

pub trait Agent: Send {
    /// Called after `reset`, before the first action of an episode.
    fn begin_episode(&mut self);

    fn act(&mut self, obs: &Observation) -> usize;

    fn update_buffer(&mut self, tr: Transition);

    fn learn_from_buffer(&mut self) -> Result<()>;

    /// Member followed this episode, for ensemble agents.
    fn active_member(&self) -> Option<usize> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Bootstrapped ensemble with additive prior networks.
    Bsp,
    /// Bootstrapped ensemble regularized toward its initial weights.
    Bsr,
    /// Plain bootstrapped ensemble.
    Bs,
    EpsGreedy,
    Dropout,
    Ucb,
    /// Chain only: always move right.
    Oracle,
    /// Chain only: always move left.
    AlwaysLeft,
    Random,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Bsp => "bsp",
            AgentKind::Bsr => "bsr",
            AgentKind::Bs => "bs",
            AgentKind::EpsGreedy => "eps_greedy",
            AgentKind::Dropout => "dropout",
            AgentKind::Ucb => "ucb",
            AgentKind::Oracle => "oracle",
            AgentKind::AlwaysLeft => "always_left",
            AgentKind::Random => "random",
        }
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, AgentKind::Bsp | AgentKind::Bsr | AgentKind::Bs)
    }

    pub fn is_scripted(self) -> bool {
        matches!(
            self,
            AgentKind::Oracle | AgentKind::AlwaysLeft | AgentKind::Random
        )
    }
}

/// Agent hyperparameters. Fields irrelevant to `kind` are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub ensemble_size: usize,
    /// Prior scale for `bsp`.
    pub beta: f64,
    /// Anchor weight for `bsr`.
    pub lambda_reg: f64,
    pub eps0: f64,
    pub anneal_episodes: u64,
    pub keep_probability: f64,
    pub ucb_bonus: f64,
    pub hidden: Vec<usize>,
    pub prior_bias_range: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub sgd_steps: usize,
    /// Learn every this many environment steps instead of once per episode.
    pub learn_every_steps: Option<u64>,
    pub buffer_capacity: Option<usize>,
    pub target_period: Option<usize>,
    pub adam: AdamConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            kind: AgentKind::Bsp,
            ensemble_size: 20,
            beta: 10.0,
            lambda_reg: 0.1,
            eps0: 0.1,
            anneal_episodes: 2000,
            keep_probability: 0.1,
            ucb_bonus: 0.1,
            hidden: vec![20],
            prior_bias_range: 1.0,
            gamma: 0.99,
            batch_size: 128,
            sgd_steps: 1,
            learn_every_steps: None,
            buffer_capacity: None,
            target_period: None,
            adam: AdamConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn with_kind(kind: AgentKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Number of Q-networks; `None` for scripted policies.
    pub fn effective_k(&self) -> Option<usize> {
        match self.kind {
            k if k.is_ensemble() => Some(self.ensemble_size),
            k if k.is_scripted() => None,
            _ => Some(1),
        }
    }

    /// Prior scale actually used; `None` when the agent has no value network.
    pub fn effective_beta(&self) -> Option<f64> {
        match self.kind {
            AgentKind::Bsp => Some(self.beta),
            k if k.is_scripted() => None,
            _ => Some(0.0),
        }
    }

    pub fn effective_lambda_reg(&self) -> Option<f64> {
        (self.kind == AgentKind::Bsr).then_some(self.lambda_reg)
    }

    pub fn effective_eps0(&self) -> Option<f64> {
        (self.kind == AgentKind::EpsGreedy).then_some(self.eps0)
    }

    pub fn td_settings(&self) -> TdSettings {
        TdSettings {
            gamma: self.gamma,
            batch_size: self.batch_size,
            sgd_steps: self.sgd_steps,
            target_period: self.target_period,
            keep_probability: (self.kind == AgentKind::Dropout).then_some(self.keep_probability),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.ensemble_size == 0 || self.batch_size == 0 || self.sgd_steps == 0 {
            return bad("ensemble_size, batch_size and sgd_steps must be positive".into());
        }
        if !(self.beta >= 0.0 && self.lambda_reg >= 0.0 && self.ucb_bonus >= 0.0) {
            return bad("beta, lambda_reg and ucb_bonus must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.eps0) {
            return bad(format!("eps0 must lie in [0, 1], got {}", self.eps0));
        }
        if !(self.keep_probability > 0.0 && self.keep_probability <= 1.0) {
            return bad(format!(
                "keep_probability must lie in (0, 1], got {}",
                self.keep_probability
            ));
        }
        if self.learn_every_steps == Some(0) || self.target_period == Some(0) {
            return bad("learn_every_steps and target_period must be positive".into());
        }
        Ok(())
    }
}

/// Build an agent for `env`. Scripted chain policies read the chain's mask.
pub fn make_agent(
    config: &AgentConfig,
    env: &dyn Environment,
    seed: u64,
) -> Result<Box<dyn Agent>> {
    config.validate()?;
    Ok(match config.kind {
        AgentKind::Bsp | AgentKind::Bsr | AgentKind::Bs => {
            Box::new(BootDqnAgent::new(config, env, seed)?)
        }
        AgentKind::EpsGreedy | AgentKind::Dropout | AgentKind::Ucb => {
            Box::new(BaselineAgent::new(config, env, seed)?)
        }
        AgentKind::Oracle | AgentKind::AlwaysLeft => {
            let chain = env.as_chain().ok_or_else(|| {
                Error::Config(format!(
                    "{} agent requires a chain environment",
                    config.kind.name()
                ))
            })?;
            Box::new(ScriptedAgent::chain(
                chain,
                config.kind == AgentKind::Oracle,
            ))
        }
        AgentKind::Random => Box::new(ScriptedAgent::random(env.num_actions(), seed)),
    })
}

/// Result of one episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub episode_return: f64,
    pub steps: usize,
}

/// Drives an agent through episodes: learn, reset, then act / step /
/// update until the episode ends. With `learn_every_steps` set, learning
/// happens on that step cadence instead of at episode start.
pub struct Trainer {
    agent: Box<dyn Agent>,
    learn_every_steps: Option<u64>,
    total_steps: u64,
    episodes: u64,
}

impl Trainer {
    pub fn new(agent: Box<dyn Agent>, learn_every_steps: Option<u64>) -> Self {
        Self {
            agent,
            learn_every_steps,
            total_steps: 0,
            episodes: 0,
        }
    }

    pub fn agent(&self) -> &dyn Agent {
        self.agent.as_ref()
    }

    pub fn agent_mut(&mut self) -> &mut dyn Agent {
        self.agent.as_mut()
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn run_episode(&mut self, env: &mut dyn Environment) -> Result<EpisodeOutcome> {
        if self.learn_every_steps.is_none() {
            self.agent.learn_from_buffer()?;
        }
        let mut obs = env.reset();
        self.agent.begin_episode();
        let mut outcome = EpisodeOutcome {
            episode_return: 0.0,
            steps: 0,
        };
        loop {
            let action = self.agent.act(&obs);
            let tr = env.step(action)?;
            outcome.episode_return += tr.reward;
            outcome.steps += 1;
            let next = tr.next_state.clone();
            self.agent.update_buffer(tr);
            self.total_steps += 1;
            if let Some(every) = self.learn_every_steps {
                if self.total_steps.is_multiple_of(every) {
                    self.agent.learn_from_buffer()?;
                }
            }
            match next {
                Some(o) => obs = o,
                None => break,
            }
        }
        self.episodes += 1;
        Ok(outcome)
    }
}
