use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentConfig, AgentKind};
use crate::env::EnvSpec;
use crate::error::{Error, Result};

/// Episode budget, seeding and output options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub budget: usize,
    pub master_seed: u64,
    pub seeds: usize,
    /// Stop a cell as soon as it has learned.
    pub early_stop: bool,
    /// Write wall-clock seconds; turn off for byte-reproducible output.
    pub record_wallclock: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            budget: 50_000,
            master_seed: 0,
            seeds: 5,
            early_stop: true,
            record_wallclock: true,
        }
    }
}

/// An agent has learned once its trailing mean regret drops below
/// `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnedRule {
    pub threshold: f64,
    pub window: usize,
}

impl Default for LearnedRule {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            window: 100,
        }
    }
}

/// Values swept over; an absent list keeps the base config's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    /// Chain sizes (chain environments only).
    pub sizes: Option<Vec<usize>>,
    pub agents: Option<Vec<AgentKind>>,
    pub beta: Option<Vec<f64>>,
    pub lambda_reg: Option<Vec<f64>>,
    pub eps0: Option<Vec<f64>>,
    pub ensemble_size: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: RunSettings,
    pub env: EnvSpec,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub learned: LearnedRule,
    #[serde(default)]
    pub grid: Grid,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, agent: AgentConfig) -> Self {
        Self {
            experiment: RunSettings::default(),
            env,
            agent,
            learned: LearnedRule::default(),
            grid: Grid::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.experiment.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.learned.window == 0 {
            return Err(Error::Config("learned.window must be at least 1".into()));
        }
        if self.grid.sizes.is_some() && !matches!(self.env, EnvSpec::Chain { .. }) {
            return Err(Error::Config(
                "grid.sizes applies to chain environments only".into(),
            ));
        }
        let g = &self.grid;
        if empty(&g.sizes)
            || empty(&g.agents)
            || empty(&g.beta)
            || empty(&g.lambda_reg)
            || empty(&g.eps0)
            || empty(&g.ensemble_size)
        {
            return Err(Error::Config("grid lists must not be empty".into()));
        }
        for cell in self.cells() {
            cell.spec.agent.validate()?;
        }
        Ok(())
    }

    /// Every (env, agent, seed) combination, in a fixed order: sizes, then
    /// agents, ensemble sizes, β, λ, ε₀, and seeds innermost.
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let sizes: Vec<Option<usize>> = match &g.sizes {
            Some(v) => v.iter().map(|s| Some(*s)).collect(),
            None => vec![None],
        };
        let kinds = g.agents.clone().unwrap_or_else(|| vec![self.agent.kind]);
        let ks = g
            .ensemble_size
            .clone()
            .unwrap_or_else(|| vec![self.agent.ensemble_size]);
        let betas = g.beta.clone().unwrap_or_else(|| vec![self.agent.beta]);
        let lambdas = g
            .lambda_reg
            .clone()
            .unwrap_or_else(|| vec![self.agent.lambda_reg]);
        let eps = g.eps0.clone().unwrap_or_else(|| vec![self.agent.eps0]);
        let mut cells = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for size in &sizes {
            let env = match (size, &self.env) {
                (Some(n), EnvSpec::Chain { .. }) => EnvSpec::Chain { size: *n },
                _ => self.env.clone(),
            };
            for &kind in &kinds {
                for &k in &ks {
                    for &beta in &betas {
                        for &lambda_reg in &lambdas {
                            for &eps0 in &eps {
                                let agent = AgentConfig {
                                    kind,
                                    ensemble_size: k,
                                    beta,
                                    lambda_reg,
                                    eps0,
                                    ..self.agent.clone()
                                };
                                let spec = CellSpec {
                                    env: env.clone(),
                                    agent,
                                    budget: self.experiment.budget,
                                    early_stop: self.experiment.early_stop,
                                    learned: self.learned,
                                };
                                // Hyperparameters a kind ignores would only produce duplicates.
                                let hash = spec.hash();
                                if !seen.insert(hash.clone()) {
                                    continue;
                                }
                                for replicate in 0..self.experiment.seeds {
                                    cells.push(Cell {
                                        index: cells.len(),
                                        spec: spec.clone(),
                                        hash: hash.clone(),
                                        replicate,
                                        seed: crate::rng::derive_seed(
                                            self.experiment.master_seed,
                                            replicate as u64,
                                            "replicate",
                                        ),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

fn empty<T>(list: &Option<Vec<T>>) -> bool {
    list.as_ref().is_some_and(|v| v.is_empty())
}

/// Everything that determines a cell's behaviour apart from its seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSpec {
    pub env: EnvSpec,
    pub agent: AgentConfig,
    pub budget: usize,
    pub early_stop: bool,
    pub learned: LearnedRule,
}

impl CellSpec {
    /// Hyperparameters the agent kind does not use are normalized away so
    /// that equivalent cells share a hash.
    fn canonical(&self) -> CellSpec {
        let mut c = self.clone();
        let d = AgentConfig::default();
        if c.agent.kind != AgentKind::Bsp {
            c.agent.beta = d.beta;
        }
        if c.agent.kind != AgentKind::Bsr {
            c.agent.lambda_reg = d.lambda_reg;
        }
        if c.agent.kind != AgentKind::EpsGreedy {
            c.agent.eps0 = d.eps0;
            c.agent.anneal_episodes = d.anneal_episodes;
        }
        if c.agent.kind != AgentKind::Dropout {
            c.agent.keep_probability = d.keep_probability;
        }
        if c.agent.kind != AgentKind::Ucb {
            c.agent.ucb_bonus = d.ucb_bonus;
        }
        if !c.agent.kind.is_ensemble() {
            c.agent.ensemble_size = d.ensemble_size;
        }
        c
    }

    /// First 12 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("cell spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..12].to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub spec: CellSpec,
    pub hash: String,
    pub replicate: usize,
    pub seed: u64,
}
