//! Ensembles of trainable networks, each paired with a frozen random prior
//! network and fitted on its own perturbed copy of the data.
//!
//! Member `k` predicts `f_k(x) + β·p_k(x)`. Only `f_k` is trained; `p_k` is
//! sampled once and never touched again.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::nn::{self, AdamConfig, AdamState, Example, Features, L2Pull, LossSpec, Mlp, Workspace};
use crate::rng::{derive_seed, rng_from_seed};

/// A frozen network scaled by `β`.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorFn {
    net: Mlp,
    scale: f64,
}

impl PriorFn {
    /// Random Glorot network with `U(−bias_range, bias_range)` biases,
    /// scaled by `scale`. With zero biases a ReLU prior is positively
    /// homogeneous in its input and carries little variety away from data.
    pub fn sample(layer_sizes: &[usize], scale: f64, bias_range: f64, seed: u64) -> Result<Self> {
        Self::from_net(
            Mlp::glorot_with_bias_range(layer_sizes, bias_range, seed)?,
            scale,
        )
    }

    pub fn from_net(net: Mlp, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prior scale must be finite and non-negative, got {scale}"
            )));
        }
        Ok(Self { net, scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.net.forward(x, None)?;
        out.iter_mut().for_each(|v| *v *= self.scale);
        Ok(out)
    }

    /// Adds `β·p(x)` to `out`; skips the pass entirely when `β = 0`.
    pub fn add_into(&self, x: Features<'_>, ws: &mut Workspace, out: &mut [f64]) {
        if self.scale == 0.0 {
            return;
        }
        let p = self.net.forward_ws(x, None, ws);
        for (o, v) in out.iter_mut().zip(p) {
            *o += self.scale * v;
        }
    }
}

/// How member `k` perturbs the shared dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseProcedure {
    None,
    /// Resample `n` of `n` rows with replacement.
    Bootstrap,
    /// Add iid `N(0, sigma²)` to every target coordinate.
    Gaussian {
        sigma: f64,
    },
}

/// Inputs and vector-valued targets.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionData {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl RegressionData {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        ensure_dim("regression rows", inputs.len(), targets.len())?;
        if let (Some(x0), Some(y0)) = (inputs.first(), targets.first()) {
            for (x, y) in inputs.iter().zip(&targets) {
                ensure_dim("input width", x0.len(), x.len())?;
                ensure_dim("target width", y0.len(), y.len())?;
            }
        }
        Ok(Self { inputs, targets })
    }

    /// One-dimensional inputs and scalar targets.
    pub fn scalar(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::new(
            xs.iter().map(|&x| vec![x]).collect(),
            ys.iter().map(|&y| vec![y]).collect(),
        )
    }

    pub fn empty() -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// The whole dataset concatenated `times` times.
    pub fn repeated(&self, times: usize) -> Self {
        let mut out = Self::empty();
        for _ in 0..times {
            out.inputs.extend(self.inputs.iter().cloned());
            out.targets.extend(self.targets.iter().cloned());
        }
        out
    }
}

/// Perturb a dataset; deterministic in `seed`.
pub fn data_noise(data: &RegressionData, procedure: NoiseProcedure, seed: u64) -> RegressionData {
    let mut rng = rng_from_seed(seed);
    match procedure {
        NoiseProcedure::None => data.clone(),
        NoiseProcedure::Bootstrap => {
            let n = data.len();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            RegressionData {
                inputs: idx.iter().map(|&i| data.inputs[i].clone()).collect(),
                targets: idx.iter().map(|&i| data.targets[i].clone()).collect(),
            }
        }
        NoiseProcedure::Gaussian { sigma } => RegressionData {
            inputs: data.inputs.clone(),
            targets: data
                .targets
                .iter()
                .map(|y| {
                    y.iter()
                        .map(|v| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            v + sigma * z
                        })
                        .collect()
                })
                .collect(),
        },
    }
}

/// Trainable network, frozen prior, optimizer state and optional anchor.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub net: Mlp,
    pub prior: PriorFn,
    pub adam: AdamState,
    /// Parameters the net is pulled toward with weight `reg_lambda`.
    pub anchor: Option<Vec<f64>>,
    pub reg_lambda: f64,
}

impl EnsembleMember {
    pub fn new(net: Mlp, prior: PriorFn, adam: AdamConfig) -> Result<Self> {
        ensure_dim("prior input", net.input_dim(), prior.net().input_dim())?;
        ensure_dim("prior output", net.output_dim(), prior.net().output_dim())?;
        let adam = AdamState::new(net.num_params(), adam);
        Ok(Self {
            net,
            prior,
            adam,
            anchor: None,
            reg_lambda: 0.0,
        })
    }

    /// Regularize toward the current (initial) weights with `λ‖θ − θ₀‖²`.
    pub fn anchored_to_init(mut self, reg_lambda: f64) -> Self {
        self.anchor = Some(self.net.params().to_vec());
        self.reg_lambda = reg_lambda;
        self
    }

    /// Regularize toward an explicit parameter vector.
    pub fn anchored_to(mut self, anchor: Vec<f64>, reg_lambda: f64) -> Self {
        self.anchor = Some(anchor);
        self.reg_lambda = reg_lambda;
        self
    }

    pub fn loss_spec(&self) -> LossSpec {
        LossSpec {
            regularizer: self
                .anchor
                .as_ref()
                .filter(|_| self.reg_lambda > 0.0)
                .map(|a| L2Pull {
                    anchor: a.clone(),
                    coefficient: self.reg_lambda,
                }),
        }
    }

    /// `f(x) + β·p(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.net.forward(x, None)?;
        let p = self.prior.eval(x)?;
        out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
        Ok(out)
    }

    /// Unchecked `f(x) + β·p(x)` into `out`.
    pub fn predict_into(&self, x: Features<'_>, ws: &mut Workspace, out: &mut [f64]) {
        out.copy_from_slice(self.net.forward_ws(x, None, ws));
        self.prior.add_into(x, ws, out);
    }

    /// Mean squared residual of `f + p` on `data`.
    pub fn residual(&self, data: &RegressionData) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in data.inputs.iter().zip(&data.targets) {
            let pred = self.predict(x)?;
            total += pred
                .iter()
                .zip(y)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>();
        }
        Ok(total / data.len().max(1) as f64)
    }
}

/// Train `member` for `steps` Adam updates on `data`, minibatches drawn
/// without replacement (full batch when `batch_size >= n`). Returns the final
/// training residual. Empty data leaves the member untouched.
pub fn fit_member(
    member: &mut EnsembleMember,
    data: &RegressionData,
    steps: usize,
    batch_size: usize,
    seed: u64,
) -> Result<f64> {
    if steps == 0 || batch_size == 0 {
        return Err(Error::InvalidArgument(
            "steps and batch size must be positive".into(),
        ));
    }
    if data.is_empty() {
        return Ok(0.0);
    }
    // The prior is frozen, so its outputs are constant offsets.
    let examples = data
        .inputs
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| Ok(Example::new(x.clone(), y.clone()).with_offset(member.prior.eval(x)?)))
        .collect::<Result<Vec<_>>>()?;
    let spec = member.loss_spec();
    let n = examples.len();
    let b = batch_size.min(n);
    let mut rng = rng_from_seed(seed);
    for _ in 0..steps {
        if b == n {
            nn::train_step_iter(&mut member.net, &mut member.adam, examples.iter(), &spec)?;
        } else {
            let idx = sample_indices(&mut rng, n, b);
            nn::train_step_iter(
                &mut member.net,
                &mut member.adam,
                idx.iter().map(|i| &examples[i]),
                &spec,
            )?;
        }
    }
    member.residual(data)
}

/// Settings shared by every member of an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub hidden: Vec<usize>,
    /// Hidden sizes of the prior network; `None` reuses `hidden`.
    pub prior_hidden: Option<Vec<usize>>,
    pub prior_scale: f64,
    /// Half-width of the uniform draw for prior-network biases.
    pub prior_bias_range: f64,
    pub noise: NoiseProcedure,
    /// `λ` of the pull toward each member's initial weights; 0 disables it.
    pub anchor_lambda: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            hidden: vec![20, 20],
            prior_hidden: None,
            prior_scale: 0.0,
            prior_bias_range: 1.0,
            noise: NoiseProcedure::Bootstrap,
            anchor_lambda: 0.0,
            steps: 2000,
            batch_size: 128,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(hidden.len() + 2);
    s.push(input);
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl EnsembleConfig {
    /// Build (untrained) member `index` for the given input/output widths.
    pub fn build_member(
        &self,
        index: usize,
        input: usize,
        output: usize,
    ) -> Result<EnsembleMember> {
        let k = index as u64;
        let net = Mlp::glorot(
            &sizes(input, &self.hidden, output),
            derive_seed(self.seed, k, "init"),
        )?;
        let prior_hidden = self.prior_hidden.as_deref().unwrap_or(&self.hidden);
        let prior = PriorFn::sample(
            &sizes(input, prior_hidden, output),
            self.prior_scale,
            self.prior_bias_range,
            derive_seed(self.seed, k, "prior"),
        )?;
        let member = EnsembleMember::new(net, prior, self.adam)?;
        Ok(if self.anchor_lambda > 0.0 {
            member.anchored_to_init(self.anchor_lambda)
        } else {
            member
        })
    }
}

/// A fitted ensemble.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub members: Vec<EnsembleMember>,
    /// Final residual of each member on its own perturbed dataset.
    pub train_residuals: Vec<f64>,
}

/// Per-member predictions and their across-member statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Prediction {
    pub fn from_values(values: Vec<Vec<f64>>) -> Self {
        let k = values.len();
        let d = values.first().map_or(0, Vec::len);
        let mean: Vec<f64> = (0..d)
            .map(|j| values.iter().map(|v| v[j]).sum::<f64>() / k as f64)
            .collect();
        let std = (0..d)
            .map(|j| {
                if k < 2 {
                    return 0.0;
                }
                let ss: f64 = values.iter().map(|v| (v[j] - mean[j]).powi(2)).sum();
                (ss / (k - 1) as f64).sqrt()
            })
            .collect();
        Self { values, mean, std }
    }
}

impl Ensemble {
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if self.members.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        let values = self
            .members
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Prediction::from_values(values))
    }
}

/// Build `k` members, perturb the data for each, and fit them independently.
/// Member `i` derives its init, prior, noise and minibatch streams from
/// `(config.seed, i)`, so results do not depend on scheduling.
pub fn fit_ensemble(data: &RegressionData, k: usize, config: &EnsembleConfig) -> Result<Ensemble> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "ensemble size must be at least 1".into(),
        ));
    }
    let (input, output) = match (data.inputs.first(), data.targets.first()) {
        (Some(x), Some(y)) => (x.len(), y.len()),
        _ => {
            return Err(Error::InvalidArgument(
                "use fit_ensemble_with_dims for empty data".into(),
            ))
        }
    };
    fit_ensemble_with_dims(data, k, config, input, output)
}

pub fn fit_ensemble_with_dims(
    data: &RegressionData,
    k: usize,
    config: &EnsembleConfig,
    input: usize,
    output: usize,
) -> Result<Ensemble> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "ensemble size must be at least 1".into(),
        ));
    }
    let fitted: Vec<(EnsembleMember, f64)> = (0..k)
        .into_par_iter()
        .map(|i| {
            let wrap = |e: Error| Error::Member {
                index: i,
                source: Box::new(e),
            };
            let mut member = config.build_member(i, input, output).map_err(wrap)?;
            let seed = config.seed;
            let noisy = data_noise(data, config.noise, derive_seed(seed, i as u64, "noise"));
            let residual = fit_member(
                &mut member,
                &noisy,
                config.steps,
                config.batch_size,
                derive_seed(seed, i as u64, "batch"),
            )
            .map_err(wrap)?;
            Ok((member, residual))
        })
        .collect::<Result<_>>()?;
    let (members, train_residuals) = fitted.into_iter().unzip();
    Ok(Ensemble {
        members,
        train_residuals,
    })
}
