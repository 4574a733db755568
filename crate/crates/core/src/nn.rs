//! Minimal feedforward network engine.
//!
//! Networks are ReLU MLPs with a linear output layer. Parameters live in a
//! single flat `Vec<f64>` so that optimizers, anchors and gradients can be
//! handled as plain slices. Each layer stores its weight block input-major
//! (`in × out`) followed by its bias vector; the input-major layout makes the
//! first layer cheap for sparse and one-hot inputs.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Borrowed network input.
#[derive(Clone, Copy, Debug)]
pub enum Features<'a> {
    Dense(&'a [f64]),
    /// A one-hot vector of length `dim` with a single `1.0` at `index`.
    OneHot {
        index: usize,
        dim: usize,
    },
}

impl Features<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Features::Dense(x) => x.len(),
            Features::OneHot { dim, .. } => *dim,
        }
    }
}

impl<'a> From<&'a [f64]> for Features<'a> {
    fn from(x: &'a [f64]) -> Self {
        Features::Dense(x)
    }
}

impl<'a> From<&'a Vec<f64>> for Features<'a> {
    fn from(x: &'a Vec<f64>) -> Self {
        Features::Dense(x.as_slice())
    }
}

/// Parameters of a ReLU multilayer perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

fn layout(layer_sizes: &[usize]) -> Result<(Vec<usize>, usize)> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::InvalidLayerSizes(layer_sizes.to_vec()));
    }
    let mut offsets = Vec::with_capacity(layer_sizes.len() - 1);
    let mut total = 0;
    for w in layer_sizes.windows(2) {
        offsets.push(total);
        total += w[0] * w[1] + w[1];
    }
    Ok((offsets, total))
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        let (offsets, total) = layout(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn glorot(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        Self::glorot_with_rng(layer_sizes, &mut rng_from_seed(seed))
    }

    pub fn glorot_with_rng(layer_sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut mlp = Self::zeros(layer_sizes)?;
        for l in 0..mlp.num_layers() {
            let (fan_in, fan_out) = (mlp.layer_sizes[l], mlp.layer_sizes[l + 1]);
            let bound = glorot_bound(fan_in, fan_out);
            let off = mlp.offsets[l];
            for w in &mut mlp.params[off..off + fan_in * fan_out] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(mlp)
    }

    /// Glorot weights with biases drawn from `U(−bias_range, bias_range)`.
    pub fn glorot_with_bias_range(
        layer_sizes: &[usize],
        bias_range: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let mut mlp = Self::glorot_with_rng(layer_sizes, &mut rng)?;
        if bias_range > 0.0 {
            for l in 0..mlp.num_layers() {
                let (fan_in, fan_out) = (mlp.layer_sizes[l], mlp.layer_sizes[l + 1]);
                let off = mlp.offsets[l] + fan_in * fan_out;
                for b in &mut mlp.params[off..off + fan_out] {
                    *b = rng.random_range(-bias_range..=bias_range);
                }
            }
        }
        Ok(mlp)
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let (offsets, total) = layout(layer_sizes)?;
        ensure_dim("parameter vector", total, params.len())?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
            offsets,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Number of affine layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn weight_index(&self, layer: usize, out: usize, inp: usize) -> usize {
        let fan_out = self.layer_sizes[layer + 1];
        debug_assert!(out < fan_out && inp < self.layer_sizes[layer]);
        self.offsets[layer] + inp * fan_out + out
    }

    fn bias_index(&self, layer: usize, out: usize) -> usize {
        let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        debug_assert!(out < fan_out);
        self.offsets[layer] + fan_in * fan_out + out
    }

    /// Weight from input unit `inp` to output unit `out` of `layer`, i.e.
    /// entry `(out, inp)` of the `(fan_out × fan_in)` matrix.
    pub fn weight(&self, layer: usize, out: usize, inp: usize) -> f64 {
        self.params[self.weight_index(layer, out, inp)]
    }

    pub fn set_weight(&mut self, layer: usize, out: usize, inp: usize, value: f64) {
        let i = self.weight_index(layer, out, inp);
        self.params[i] = value;
    }

    pub fn bias(&self, layer: usize, out: usize) -> f64 {
        self.params[self.bias_index(layer, out)]
    }

    pub fn set_bias(&mut self, layer: usize, out: usize, value: f64) {
        let i = self.bias_index(layer, out);
        self.params[i] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Checked forward pass on a dense input.
    pub fn forward(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        self.forward_features(Features::Dense(input), mask)
    }

    /// Checked forward pass.
    pub fn forward_features(
        &self,
        input: Features<'_>,
        mask: Option<&DropoutMask>,
    ) -> Result<Vec<f64>> {
        self.check_input(input, mask)?;
        let mut ws = Workspace::default();
        Ok(self.forward_ws(input, mask, &mut ws).to_vec())
    }

    pub fn check_input(&self, input: Features<'_>, mask: Option<&DropoutMask>) -> Result<()> {
        ensure_dim("network input", self.input_dim(), input.dim())?;
        if let Features::OneHot { index, dim } = input {
            if index >= dim {
                return Err(Error::InvalidArgument(format!(
                    "one-hot index {index} out of range {dim}"
                )));
            }
        }
        if let Some(mask) = mask {
            mask.check_shape(&self.layer_sizes)?;
        }
        Ok(())
    }

    /// Forward pass into a reusable workspace. Dimensions are only
    /// debug-checked; use [`Mlp::check_input`] on untrusted inputs.
    ///
    /// Hidden units are ReLU, then multiplied by the mask bit when a mask is
    /// given. No `1/p` rescaling is applied.
    pub fn forward_ws<'w>(
        &self,
        input: Features<'_>,
        mask: Option<&DropoutMask>,
        ws: &'w mut Workspace,
    ) -> &'w [f64] {
        debug_assert_eq!(input.dim(), self.input_dim());
        ws.prepare(&self.layer_sizes);
        ws.store_input(input);
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.offsets[l];
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let (prev, rest) = ws.acts.split_at_mut(l);
            let out = &mut rest[0];
            out.copy_from_slice(b);
            let mut accumulate = |i: usize, xi: f64| {
                let row = &w[i * fan_out..(i + 1) * fan_out];
                for (o, wij) in out.iter_mut().zip(row) {
                    *o += xi * wij;
                }
            };
            if l == 0 {
                match &ws.input {
                    InputCache::OneHot(index) => accumulate(*index, 1.0),
                    InputCache::Dense(x) => {
                        for (i, &xi) in x.iter().enumerate() {
                            if xi != 0.0 {
                                accumulate(i, xi);
                            }
                        }
                    }
                }
            } else {
                for (i, &xi) in prev[l - 1].iter().enumerate() {
                    if xi != 0.0 {
                        accumulate(i, xi);
                    }
                }
            }
            if l < last {
                for o in out.iter_mut() {
                    if *o < 0.0 {
                        *o = 0.0;
                    }
                }
                if let Some(mask) = mask {
                    for (o, &keep) in out.iter_mut().zip(&mask.layers[l]) {
                        if !keep {
                            *o = 0.0;
                        }
                    }
                }
            }
        }
        &ws.acts[last]
    }

    /// Accumulate into `grad` the parameter gradient given `d_output`, the
    /// derivative of the loss with respect to the network output, for the
    /// forward pass currently held in `ws`.
    pub fn backward(&self, ws: &mut Workspace, d_output: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(d_output.len(), self.output_dim());
        let Workspace {
            input,
            acts,
            delta,
            delta_prev,
            ..
        } = ws;
        delta.clear();
        delta.extend_from_slice(d_output);
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.offsets[l];
            let (gw, gb) =
                grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for (g, d) in gb.iter_mut().zip(delta.iter()) {
                *g += d;
            }
            let mut outer = |i: usize, xi: f64| {
                for (g, d) in gw[i * fan_out..(i + 1) * fan_out]
                    .iter_mut()
                    .zip(delta.iter())
                {
                    *g += xi * d;
                }
            };
            if l == 0 {
                match input {
                    InputCache::OneHot(index) => outer(*index, 1.0),
                    InputCache::Dense(x) => {
                        for (i, &xi) in x.iter().enumerate() {
                            if xi != 0.0 {
                                outer(i, xi);
                            }
                        }
                    }
                }
                break;
            }
            let a_prev = &acts[l - 1];
            for (i, &xi) in a_prev.iter().enumerate() {
                if xi != 0.0 {
                    outer(i, xi);
                }
            }
            // ReLU and mask derivative: the post-mask activation is positive
            // exactly when the unit passed both.
            let w = &self.params[off..off + fan_in * fan_out];
            delta_prev.clear();
            delta_prev.extend(a_prev.iter().enumerate().map(|(i, &a)| {
                if a > 0.0 {
                    w[i * fan_out..(i + 1) * fan_out]
                        .iter()
                        .zip(delta.iter())
                        .map(|(wij, d)| wij * d)
                        .sum()
                } else {
                    0.0
                }
            }));
            std::mem::swap(delta, delta_prev);
        }
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Clone, Debug)]
enum InputCache {
    Dense(Vec<f64>),
    OneHot(usize),
}

impl Default for InputCache {
    fn default() -> Self {
        InputCache::Dense(Vec::new())
    }
}

/// Scratch buffers for forward and backward passes.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    input: InputCache,
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn prepare(&mut self, layer_sizes: &[usize]) {
        let layers = layer_sizes.len() - 1;
        if self.acts.len() != layers
            || self
                .acts
                .iter()
                .zip(&layer_sizes[1..])
                .any(|(a, &n)| a.len() != n)
        {
            self.acts = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        }
    }

    fn store_input(&mut self, input: Features<'_>) {
        match input {
            Features::OneHot { index, .. } => self.input = InputCache::OneHot(index),
            Features::Dense(x) => match &mut self.input {
                InputCache::Dense(buf) => {
                    buf.clear();
                    buf.extend_from_slice(x);
                }
                other => *other = InputCache::Dense(x.to_vec()),
            },
        }
    }

    /// Output of the most recent forward pass.
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Per-unit keep indicators for every hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    keep_probability: f64,
    layers: Vec<Vec<bool>>,
}

impl DropoutMask {
    /// Draw a mask with independent `Bernoulli(keep_probability)` bits.
    pub fn sample(layer_sizes: &[usize], keep_probability: f64, rng: &mut Rng) -> Self {
        let hidden = &layer_sizes[1..layer_sizes.len() - 1];
        let layers = hidden
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_bool(keep_probability)).collect())
            .collect();
        Self {
            keep_probability,
            layers,
        }
    }

    pub fn ones(layer_sizes: &[usize]) -> Self {
        let hidden = &layer_sizes[1..layer_sizes.len() - 1];
        Self {
            keep_probability: 1.0,
            layers: hidden.iter().map(|&n| vec![true; n]).collect(),
        }
    }

    pub fn keep_probability(&self) -> f64 {
        self.keep_probability
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.layers
    }

    fn check_shape(&self, layer_sizes: &[usize]) -> Result<()> {
        let hidden = &layer_sizes[1..layer_sizes.len() - 1];
        ensure_dim("dropout mask layers", hidden.len(), self.layers.len())?;
        for (&n, l) in hidden.iter().zip(&self.layers) {
            ensure_dim("dropout mask units", n, l.len())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moment estimates for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            step_count: 0,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One bias-corrected Adam update of `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.first_moment.len());
        debug_assert_eq!(grad.len(), self.first_moment.len());
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 / (1.0 - beta1.powi(t));
        let c2 = 1.0 / (1.0 - beta2.powi(t));
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m * c1) / ((*v * c2).sqrt() + epsilon);
        }
    }
}

/// A supervised example. `offset` is a constant added to the network output
/// before the loss (a frozen prior's contribution); it receives no gradient.
#[derive(Clone, Debug)]
pub struct Example {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub offset: Option<Vec<f64>>,
    pub mask: Option<DropoutMask>,
}

impl Example {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Self {
            input,
            target,
            offset: None,
            mask: None,
        }
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Self {
        self.offset = Some(offset);
        self
    }

    pub fn with_mask(mut self, mask: DropoutMask) -> Self {
        self.mask = Some(mask);
        self
    }
}

/// Quadratic pull `coefficient · ‖θ − anchor‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct L2Pull {
    pub anchor: Vec<f64>,
    pub coefficient: f64,
}

impl L2Pull {
    pub fn value(&self, params: &[f64]) -> f64 {
        self.coefficient
            * params
                .iter()
                .zip(&self.anchor)
                .map(|(p, a)| (p - a) * (p - a))
                .sum::<f64>()
    }

    pub fn add_gradient(&self, params: &[f64], grad: &mut [f64]) {
        let c = 2.0 * self.coefficient;
        for ((g, p), a) in grad.iter_mut().zip(params).zip(&self.anchor) {
            *g += c * (p - a);
        }
    }
}

/// Mean squared error over the batch plus an optional L2 pull.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossSpec {
    pub regularizer: Option<L2Pull>,
}

fn check_example(mlp: &Mlp, ex: &Example) -> Result<()> {
    mlp.check_input(Features::Dense(&ex.input), ex.mask.as_ref())?;
    ensure_dim("target", mlp.output_dim(), ex.target.len())?;
    if let Some(off) = &ex.offset {
        ensure_dim("output offset", mlp.output_dim(), off.len())?;
    }
    Ok(())
}

/// Loss value and its gradient (written into `grad`, which is resized).
pub fn loss_and_gradient(
    mlp: &Mlp,
    batch: &[Example],
    spec: &LossSpec,
    grad: &mut Vec<f64>,
) -> Result<f64> {
    batch_loss_and_gradient(mlp, batch.iter(), spec, grad)
}

/// [`loss_and_gradient`] over any sequence of borrowed examples.
pub fn batch_loss_and_gradient<'a, I>(
    mlp: &Mlp,
    batch: I,
    spec: &LossSpec,
    grad: &mut Vec<f64>,
) -> Result<f64>
where
    I: ExactSizeIterator<Item = &'a Example>,
{
    if batch.len() == 0 {
        return Err(Error::EmptyBatch);
    }
    if let Some(reg) = &spec.regularizer {
        ensure_dim("regularizer anchor", mlp.num_params(), reg.anchor.len())?;
    }
    grad.clear();
    grad.resize(mlp.num_params(), 0.0);
    let mut ws = Workspace::default();
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut d_out = vec![0.0; mlp.output_dim()];
    for ex in batch {
        check_example(mlp, ex)?;
        let out = mlp.forward_ws(Features::Dense(&ex.input), ex.mask.as_ref(), &mut ws);
        for (j, d) in d_out.iter_mut().enumerate() {
            let pred = out[j] + ex.offset.as_ref().map_or(0.0, |o| o[j]);
            let err = pred - ex.target[j];
            loss += scale * err * err;
            *d = 2.0 * scale * err;
        }
        mlp.backward(&mut ws, &d_out, grad);
    }
    if let Some(reg) = &spec.regularizer {
        loss += reg.value(mlp.params());
        reg.add_gradient(mlp.params(), grad);
    }
    Ok(loss)
}

/// One Adam update on the batch loss. Returns the loss before the update.
pub fn train_step(
    mlp: &mut Mlp,
    adam: &mut AdamState,
    batch: &[Example],
    spec: &LossSpec,
) -> Result<f64> {
    train_step_iter(mlp, adam, batch.iter(), spec)
}

pub fn train_step_iter<'a, I>(
    mlp: &mut Mlp,
    adam: &mut AdamState,
    batch: I,
    spec: &LossSpec,
) -> Result<f64>
where
    I: ExactSizeIterator<Item = &'a Example>,
{
    let mut grad = Vec::new();
    let loss = batch_loss_and_gradient(mlp, batch, spec, &mut grad)?;
    apply_checked(mlp, adam, loss, &grad)?;
    Ok(loss)
}

/// Reject non-finite loss or gradient, otherwise take an Adam step.
pub fn apply_checked(mlp: &mut Mlp, adam: &mut AdamState, loss: f64, grad: &[f64]) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: "loss" });
    }
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite { what: "gradient" });
    }
    adam.step(mlp.params_mut(), grad);
    Ok(())
}
