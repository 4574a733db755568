//! Dropout as a posterior: its spread is fixed by the mask rate, not the data.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{fmt, PredictiveSummary, Rows};
use crate::ensemble::{fit_ensemble, EnsembleConfig, RegressionData};
use crate::error::{Error, Result};
use crate::nn::{self, AdamConfig, AdamState, DropoutMask, Example, L2Pull, LossSpec, Mlp};
use crate::rng::{derive_seed, rng_from_seed};

/// Expected squared loss of `f = Σ wᵢθᵢ`, `wᵢ ~ Bernoulli(p)`, averaged over
/// targets `ys`, plus `λ‖θ‖²`. The mask expectation is taken in closed form:
/// `E[(f − y)²] = p(1 − p)Σθᵢ² + (pΣθᵢ − y)²`.
pub fn expected_dropout_loss(theta: &[f64], p: f64, lambda: f64, ys: &[f64]) -> f64 {
    let sum: f64 = theta.iter().sum();
    let sq: f64 = theta.iter().map(|t| t * t).sum();
    let fit = ys.iter().map(|y| (p * sum - y).powi(2)).sum::<f64>() / ys.len().max(1) as f64;
    p * (1.0 - p) * sq + fit + lambda * sq
}

/// Stationary point of [`expected_dropout_loss`] along `θ = θ̄·1`.
pub fn dropout_theta_bar(d: usize, p: f64, lambda: f64, y_bar: f64) -> f64 {
    y_bar / (1.0 + p * (d as f64 - 1.0) + lambda / p)
}

/// The commonly quoted variant with a `λ/2` term in the denominator.
pub fn half_lambda_theta_bar(d: usize, p: f64, lambda: f64, y_bar: f64) -> f64 {
    y_bar / (1.0 + p * (d as f64 - 1.0) + lambda / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DropoutClosedForm {
    pub d: usize,
    pub p: f64,
    pub lambda: f64,
    pub y_bar: f64,
    /// Minimizer found by golden-section search on the exact expected loss.
    pub theta_bar: f64,
    pub mean: f64,
    pub std: f64,
    pub derived_theta_bar: f64,
    pub half_lambda_theta_bar: f64,
    pub agrees_with_half_lambda: bool,
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Symmetric optimum of the expected dropout loss for a `d`-unit linear
/// model with keep probability `p` and weight decay `λ`, with the predictive
/// moments `μ = θ̄dp` and `σ = θ̄√(dp(1 − p))`.
pub fn dropout_closed_form(d: usize, p: f64, lambda: f64, y_bar: f64) -> Result<DropoutClosedForm> {
    if d == 0 || !(p > 0.0 && p < 1.0) || !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need d >= 1, 0 < p < 1, lambda > 0 (got d={d}, p={p}, lambda={lambda})"
        )));
    }
    let loss = |t: f64| expected_dropout_loss(&vec![t; d], p, lambda, &[y_bar]);
    let r = y_bar.abs() + 1.0;
    let theta_bar = golden_section(loss, -r, r);
    let df = d as f64;
    let variant = half_lambda_theta_bar(d, p, lambda, y_bar);
    Ok(DropoutClosedForm {
        d,
        p,
        lambda,
        y_bar,
        theta_bar,
        mean: theta_bar * df * p,
        std: theta_bar.abs() * (df * p * (1.0 - p)).sqrt(),
        derived_theta_bar: dropout_theta_bar(d, p, lambda, y_bar),
        half_lambda_theta_bar: variant,
        agrees_with_half_lambda: (theta_bar - variant).abs() <= 1e-6 * (1.0 + variant.abs()),
    })
}

/// Mean and std of `θ̄ Σ wᵢ` over `samples` sampled masks.
pub fn mask_sampled_ratio(
    d: usize,
    p: f64,
    theta_bar: f64,
    samples: usize,
    seed: u64,
) -> PredictiveSummary {
    let mut rng = rng_from_seed(seed);
    let draws: Vec<f64> = (0..samples)
        .map(|_| theta_bar * (0..d).filter(|_| rng.random_bool(p)).count() as f64)
        .collect();
    PredictiveSummary::from_samples(0.0, &draws)
}

impl Rows for DropoutClosedForm {
    fn header() -> Vec<&'static str> {
        vec![
            "d",
            "p",
            "lambda",
            "y_bar",
            "theta_bar",
            "mean",
            "std",
            "std_over_mean",
            "derived_theta_bar",
            "half_lambda_theta_bar",
            "agrees_with_half_lambda",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.d.to_string(),
            fmt(self.p),
            fmt(self.lambda),
            fmt(self.y_bar),
            fmt(self.theta_bar),
            fmt(self.mean),
            fmt(self.std),
            fmt(self.std / self.mean),
            fmt(self.derived_theta_bar),
            fmt(self.half_lambda_theta_bar),
            self.agrees_with_half_lambda.to_string(),
        ]]
    }
}

/// Training settings for a single dropout regression net. Masks drop hidden
/// units without rescaling; each example gets a fresh mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutTraining {
    pub hidden: Vec<usize>,
    pub keep_probability: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub adam: AdamConfig,
    /// Masks drawn per predictive summary.
    pub samples: usize,
}

impl Default for DropoutTraining {
    fn default() -> Self {
        Self {
            hidden: vec![20, 20],
            keep_probability: 0.5,
            steps: 4000,
            batch_size: 32,
            weight_decay: 0.0,
            adam: AdamConfig::with_learning_rate(1e-3),
            samples: 2000,
        }
    }
}

/// Minibatches are drawn uniformly with replacement, so a dataset and any of
/// its duplications define the same training process in distribution.
pub fn train_dropout_net(data: &RegressionData, cfg: &DropoutTraining, seed: u64) -> Result<Mlp> {
    let (input, output) = match (data.inputs().first(), data.targets().first()) {
        (Some(x), Some(y)) => (x.len(), y.len()),
        _ => return Err(Error::EmptyBatch),
    };
    if !(cfg.keep_probability > 0.0 && cfg.keep_probability <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep probability {} outside (0, 1]",
            cfg.keep_probability
        )));
    }
    let mut sizes = vec![input];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(output);
    let mut net = Mlp::glorot(&sizes, derive_seed(seed, 0, "init"))?;
    let mut adam = AdamState::new(net.num_params(), cfg.adam);
    let spec = LossSpec {
        regularizer: (cfg.weight_decay > 0.0).then(|| L2Pull {
            anchor: vec![0.0; net.num_params()],
            coefficient: cfg.weight_decay,
        }),
    };
    let mut rng = rng_from_seed(derive_seed(seed, 0, "batch"));
    let n = data.len();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.steps {
        batch.clear();
        for _ in 0..cfg.batch_size.max(1) {
            let i = rng.random_range(0..n);
            let mask = DropoutMask::sample(&sizes, cfg.keep_probability, &mut rng);
            batch.push(
                Example::new(data.inputs()[i].clone(), data.targets()[i].clone()).with_mask(mask),
            );
        }
        nn::train_step(&mut net, &mut adam, &batch, &spec)?;
    }
    Ok(net)
}

/// Predictive summary of the first output at `x` under `samples` fresh masks.
pub fn dropout_predict(
    net: &Mlp,
    x: f64,
    keep_probability: f64,
    samples: usize,
    seed: u64,
) -> Result<PredictiveSummary> {
    let mut rng = rng_from_seed(seed);
    let draws = (0..samples)
        .map(|_| {
            let mask = DropoutMask::sample(net.layer_sizes(), keep_probability, &mut rng);
            Ok(net.forward(&[x], Some(&mask))?[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PredictiveSummary::from_samples(x, &draws))
}

/// Predictive summaries at `probe` from a method trained on `D` and on `D`
/// repeated `factor` times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DropoutDuplication {
    pub method: String,
    pub factor: usize,
    pub base: PredictiveSummary,
    pub duplicated: PredictiveSummary,
}

impl DropoutDuplication {
    /// `std on D×factor / std on D`.
    pub fn std_ratio(&self) -> f64 {
        self.duplicated.std / self.base.std
    }
}

impl Rows for DropoutDuplication {
    fn header() -> Vec<&'static str> {
        vec![
            "method",
            "dup_factor",
            "x",
            "mean_base",
            "std_base",
            "mean_dup",
            "std_dup",
            "std_ratio",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.method.clone(),
            self.factor.to_string(),
            fmt(self.base.x),
            fmt(self.base.mean),
            fmt(self.base.std),
            fmt(self.duplicated.mean),
            fmt(self.duplicated.std),
            fmt(self.std_ratio()),
        ]]
    }
}

fn check_factor(factor: usize) -> Result<()> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!(
            "duplication factor {factor} < 2"
        )));
    }
    Ok(())
}

/// Train two dropout nets with the same budget, on `D` and on `D×factor`.
/// Both predictive summaries use the same mask stream.
pub fn dropout_duplication_check(
    cfg: &DropoutTraining,
    data: &RegressionData,
    factor: usize,
    probe: f64,
    seed: u64,
) -> Result<DropoutDuplication> {
    check_factor(factor)?;
    let predict_seed = derive_seed(seed, 0, "predict");
    let base = train_dropout_net(data, cfg, seed)?;
    let dup = train_dropout_net(&data.repeated(factor), cfg, seed)?;
    Ok(DropoutDuplication {
        method: "dropout".into(),
        factor,
        base: dropout_predict(
            &base,
            probe,
            cfg.keep_probability,
            cfg.samples,
            predict_seed,
        )?,
        duplicated: dropout_predict(&dup, probe, cfg.keep_probability, cfg.samples, predict_seed)?,
    })
}

/// The same comparison for a `k`-member ensemble fitted with `cfg`.
pub fn ensemble_duplication_check(
    cfg: &EnsembleConfig,
    k: usize,
    data: &RegressionData,
    factor: usize,
    probe: f64,
) -> Result<DropoutDuplication> {
    check_factor(factor)?;
    let summarize = |d: &RegressionData| -> Result<PredictiveSummary> {
        let ens = fit_ensemble(d, k, cfg)?;
        let pred = ens.predict(&[probe])?;
        let v: Vec<f64> = pred.values.iter().map(|v| v[0]).collect();
        Ok(PredictiveSummary::from_samples(probe, &v))
    };
    Ok(DropoutDuplication {
        method: "ensemble".into(),
        factor,
        base: summarize(data)?,
        duplicated: summarize(&data.repeated(factor))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizer_matches_stationary_point() {
        for &(d, p, l, y) in &[
            (10, 0.5, 0.1, 1.0),
            (3, 0.9, 2.0, -4.0),
            (1, 0.2, 0.01, 0.5),
        ] {
            let c = dropout_closed_form(d, p, l, y).unwrap();
            assert!((c.theta_bar - c.derived_theta_bar).abs() < 1e-7, "{c:?}");
        }
    }

    #[test]
    fn symmetric_point_is_stationary_in_every_coordinate() {
        let (d, p, l, y) = (6, 0.3, 0.5, 2.0);
        let t = dropout_theta_bar(d, p, l, y);
        let h = 1e-6;
        for i in 0..d {
            let mut up = vec![t; d];
            let mut dn = vec![t; d];
            up[i] += h;
            dn[i] -= h;
            let g = (expected_dropout_loss(&up, p, l, &[y])
                - expected_dropout_loss(&dn, p, l, &[y]))
                / (2.0 * h);
            assert!(g.abs() < 1e-6, "coordinate {i}: {g}");
        }
    }

    #[test]
    fn expected_loss_matches_mask_average() {
        let theta = [0.3, -0.2, 0.7];
        let p = 0.4;
        let mut exact = 0.0;
        for bits in 0..8u32 {
            let w: Vec<f64> = (0..3).map(|i| ((bits >> i) & 1) as f64).collect();
            let prob: f64 = w
                .iter()
                .map(|&b| if b == 1.0 { p } else { 1.0 - p })
                .product();
            let f: f64 = w.iter().zip(&theta).map(|(a, b)| a * b).sum();
            exact += prob * (f - 1.5).powi(2);
        }
        assert!((expected_dropout_loss(&theta, p, 0.0, &[1.5]) - exact).abs() < 1e-12);
    }

    #[test]
    fn ratio_and_zero_mean() {
        let c = dropout_closed_form(10, 0.5, 0.1, 1.0).unwrap();
        assert!((c.std / c.mean - 0.1f64.sqrt()).abs() < 1e-9);
        assert!(!c.agrees_with_half_lambda);
        let z = dropout_closed_form(10, 0.5, 0.1, 0.0).unwrap();
        assert!(z.theta_bar.abs() < 1e-9 && z.mean.abs() < 1e-8 && z.std < 1e-8);
        let s = mask_sampled_ratio(10, 0.5, c.theta_bar, 100_000, 1);
        assert!((s.std / s.mean / 0.316_23 - 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(dropout_closed_form(0, 0.5, 1.0, 1.0).is_err());
        assert!(dropout_closed_form(3, 1.0, 1.0, 1.0).is_err());
        assert!(dropout_closed_form(3, 0.5, 0.0, 1.0).is_err());
    }
}
