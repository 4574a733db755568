//! Thompson sampling with the wrong notion of uncertainty on two-armed bandits.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{dropout_theta_bar, log_checkpoints, RegretCurve};
use crate::env::BernoulliBandit;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

struct Recorder {
    checkpoints: Vec<usize>,
    next: usize,
    total: f64,
    points: Vec<(usize, f64)>,
}

impl Recorder {
    fn new(horizon: usize) -> Self {
        let checkpoints = log_checkpoints(horizon);
        Self {
            points: vec![(0, 0.0)],
            checkpoints,
            next: 1,
            total: 0.0,
        }
    }

    /// Record the regret of step `t` (1-based).
    fn add(&mut self, t: usize, regret: f64) {
        self.total += regret;
        if self.checkpoints.get(self.next) == Some(&t) {
            self.points.push((t, self.total));
            self.next += 1;
        }
    }

    fn finish(self, label: &str, horizon: usize) -> RegretCurve {
        RegretCurve {
            label: label.to_string(),
            horizon,
            points: self.points,
        }
    }
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {eps} outside (0, 1/2)"
        )));
    }
    Ok(())
}

/// Arm 1 pays `Bernoulli(1/2)`, arm 2 pays `1 − ε` deterministically. The
/// agent knows both return distributions exactly and samples one return per
/// arm each step, so it picks arm 1 whenever the coin lands heads.
pub fn distributional_ts_regret(eps: f64, horizon: usize, seed: u64) -> Result<RegretCurve> {
    check_epsilon(eps)?;
    let mut rng = rng_from_seed(seed);
    let gaps = [0.5 - eps, 0.0];
    let mut rec = Recorder::new(horizon);
    for t in 1..=horizon {
        let sampled = [if rng.random_bool(0.5) { 1.0 } else { 0.0 }, 1.0 - eps];
        rec.add(t, gaps[argmax(&sampled)]);
    }
    Ok(rec.finish("distributional_ts", horizon))
}

/// Thompson sampling on the same problem with full information: the
/// posterior over each arm's mean reward is a point mass.
pub fn bayes_ts_full_information(eps: f64, horizon: usize) -> Result<RegretCurve> {
    check_epsilon(eps)?;
    let means = [0.5, 1.0 - eps];
    let gaps = [0.5 - eps, 0.0];
    let mut rec = Recorder::new(horizon);
    for t in 1..=horizon {
        rec.add(t, gaps[argmax(&means)]);
    }
    Ok(rec.finish("bayes_ts", horizon))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutBanditConfig {
    /// Units of the linear dropout model per arm.
    pub d: usize,
    pub keep_probability: f64,
    pub lambda: f64,
    /// Arms pay `Bernoulli(1/2)` and `Bernoulli(1/2 + ε)`.
    pub eps: f64,
    pub horizon: usize,
    pub ensemble_size: usize,
    pub prior_mean: f64,
    pub prior_variance: f64,
    /// Std of the Gaussian perturbation added to each observed reward.
    pub noise_std: f64,
}

impl Default for DropoutBanditConfig {
    fn default() -> Self {
        Self {
            d: 10,
            keep_probability: 0.5,
            lambda: 0.1,
            eps: 0.1,
            horizon: 20_000,
            ensemble_size: 100,
            prior_mean: 0.0,
            prior_variance: 1.0,
            noise_std: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BanditContrast {
    pub dropout: RegretCurve,
    pub ensemble: RegretCurve,
}

/// Dropout Thompson sampling against ensemble-with-prior Thompson sampling on
/// the same bandit. Which arm is better is drawn from `seed`.
///
/// The dropout agent pulls each arm once, then fits each arm's symmetric
/// expected-loss optimum `θ̄` from its mean reward and acts greedily on
/// `θ̄ Σ wᵢ` under a fresh mask per arm and step.
///
/// Ensemble member `k` for arm `a` regresses perturbed rewards `y + σz` onto
/// a constant, regularized toward its own prior draw; each step one member
/// index is drawn uniformly and the agent is greedy on it.
pub fn dropout_bandit_regret(cfg: &DropoutBanditConfig, seed: u64) -> Result<BanditContrast> {
    if !(0.0..0.5).contains(&cfg.eps) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {} outside [0, 1/2)",
            cfg.eps
        )));
    }
    if cfg.d == 0
        || !(cfg.keep_probability > 0.0 && cfg.keep_probability < 1.0)
        || !(cfg.lambda > 0.0)
    {
        return Err(Error::InvalidArgument(
            "need d >= 1, 0 < p < 1, lambda > 0".into(),
        ));
    }
    if cfg.ensemble_size == 0 || !(cfg.prior_variance > 0.0) || !(cfg.noise_std >= 0.0) {
        return Err(Error::InvalidArgument(
            "need a non-empty ensemble and positive prior variance".into(),
        ));
    }
    let best = usize::from(rng_from_seed(derive_seed(seed, 0, "arms")).random_bool(0.5));
    let mut probs = vec![0.5, 0.5];
    probs[best] += cfg.eps;
    let env_seed = derive_seed(seed, 0, "env");
    Ok(BanditContrast {
        dropout: run_dropout(cfg, &probs, env_seed, derive_seed(seed, 0, "dropout"))?,
        ensemble: run_ensemble(cfg, &probs, env_seed, derive_seed(seed, 0, "ensemble"))?,
    })
}

fn run_dropout(
    cfg: &DropoutBanditConfig,
    probs: &[f64],
    env_seed: u64,
    seed: u64,
) -> Result<RegretCurve> {
    let mut env = BernoulliBandit::new(probs.to_vec(), env_seed)?;
    let mut rng = rng_from_seed(seed);
    let arms = probs.len();
    let (mut sums, mut counts) = (vec![0.0; arms], vec![0usize; arms]);
    let mut sampled = vec![0.0; arms];
    let mut rec = Recorder::new(cfg.horizon);
    for t in 1..=cfg.horizon {
        let arm = if t <= arms {
            t - 1
        } else {
            for a in 0..arms {
                let theta = dropout_theta_bar(
                    cfg.d,
                    cfg.keep_probability,
                    cfg.lambda,
                    sums[a] / counts[a] as f64,
                );
                let kept = (0..cfg.d)
                    .filter(|_| rng.random_bool(cfg.keep_probability))
                    .count();
                sampled[a] = theta * kept as f64;
            }
            argmax(&sampled)
        };
        sums[arm] += env.pull(arm);
        counts[arm] += 1;
        rec.add(t, env.gap(arm));
    }
    Ok(rec.finish("dropout_ts", cfg.horizon))
}

fn run_ensemble(
    cfg: &DropoutBanditConfig,
    probs: &[f64],
    env_seed: u64,
    seed: u64,
) -> Result<RegretCurve> {
    let mut env = BernoulliBandit::new(probs.to_vec(), env_seed)?;
    let mut rng = rng_from_seed(seed);
    let arms = probs.len();
    let k = cfg.ensemble_size;
    let ridge = cfg.noise_std * cfg.noise_std / cfg.prior_variance;
    let sd = cfg.prior_variance.sqrt();
    // Per (arm, member): prior draw and running sum of perturbed rewards.
    let anchors: Vec<Vec<f64>> = (0..arms)
        .map(|_| {
            (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    cfg.prior_mean + sd * z
                })
                .collect()
        })
        .collect();
    let mut sums = vec![vec![0.0; k]; arms];
    let mut counts = vec![0usize; arms];
    let mut sampled = vec![0.0; arms];
    let mut rec = Recorder::new(cfg.horizon);
    for t in 1..=cfg.horizon {
        let j = rng.random_range(0..k);
        for a in 0..arms {
            sampled[a] = (sums[a][j] + ridge * anchors[a][j]) / (counts[a] as f64 + ridge);
        }
        let arm = argmax(&sampled);
        let y = env.pull(arm);
        for s in sums[arm].iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += y + cfg.noise_std * z;
        }
        counts[arm] += 1;
        rec.add(t, env.gap(arm));
    }
    Ok(rec.finish("ensemble_prior_ts", cfg.horizon))
}
