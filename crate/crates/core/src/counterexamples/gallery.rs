//! Predictive uncertainty of several ensemble flavours and dropout on a tiny
//! one-dimensional regression set, optionally duplicated.

use serde::{Deserialize, Serialize};

use super::dropout::{dropout_predict, train_dropout_net, DropoutTraining};
use super::{fmt, PredictiveSummary, Rows};
use crate::ensemble::{fit_ensemble, EnsembleConfig, NoiseProcedure, RegressionData};
use crate::error::Result;
use crate::rng::derive_seed;

/// Eleven points `xᵢ = (i − 5)/5`, all zero except `y = 5` at `x = 1`.
pub fn gallery_data() -> RegressionData {
    let xs: Vec<f64> = (0..=10).map(|i| (i as f64 - 5.0) / 5.0).collect();
    let ys: Vec<f64> = (0..=10).map(|i| if i == 10 { 5.0 } else { 0.0 }).collect();
    RegressionData::scalar(&xs, &ys).expect("rows match")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plain,
    Bootstrap,
    BootstrapPrior,
    Dropout,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Bootstrap => "bootstrap",
            Method::BootstrapPrior => "bootstrap_prior",
            Method::Dropout => "dropout",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub methods: Vec<Method>,
    pub probes: Vec<f64>,
    pub data_scales: Vec<usize>,
    pub ensemble_size: usize,
    /// Prior scale of the `bootstrap_prior` method.
    pub beta: f64,
    /// Shared settings of the ensemble methods; noise and prior scale are
    /// overridden per method.
    pub ensemble: EnsembleConfig,
    pub dropout: DropoutTraining,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            methods: vec![
                Method::Plain,
                Method::Bootstrap,
                Method::BootstrapPrior,
                Method::Dropout,
            ],
            probes: (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect(),
            data_scales: vec![1],
            ensemble_size: 20,
            beta: 3.0,
            ensemble: EnsembleConfig {
                steps: 6000,
                ..EnsembleConfig::default()
            },
            dropout: DropoutTraining::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GalleryRow {
    pub method: Method,
    pub data_scale: usize,
    pub summary: PredictiveSummary,
    /// Largest training residual over members; for dropout, the mean squared
    /// error of the mask-averaged prediction.
    pub train_residual: f64,
}

/// Fit every method on the gallery data repeated `s` times for each scale `s`
/// and summarize predictions at each probe.
pub fn regression_uncertainty_suite(cfg: &SuiteConfig) -> Result<Vec<GalleryRow>> {
    let base = gallery_data();
    let mut rows = Vec::new();
    for &scale in &cfg.data_scales {
        let data = base.repeated(scale.max(1));
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let seed = derive_seed(cfg.seed, mi as u64, method.name());
            let (summaries, residual) = match method {
                Method::Dropout => run_dropout(&cfg.dropout, &data, &base, &cfg.probes, seed)?,
                _ => run_ensemble(cfg, method, &data, seed)?,
            };
            rows.extend(summaries.into_iter().map(|summary| GalleryRow {
                method,
                data_scale: scale,
                summary,
                train_residual: residual,
            }));
        }
    }
    Ok(rows)
}

fn run_ensemble(
    cfg: &SuiteConfig,
    method: Method,
    data: &RegressionData,
    seed: u64,
) -> Result<(Vec<PredictiveSummary>, f64)> {
    let (noise, prior_scale) = match method {
        Method::Plain => (NoiseProcedure::None, 0.0),
        Method::Bootstrap => (NoiseProcedure::Bootstrap, 0.0),
        _ => (NoiseProcedure::Bootstrap, cfg.beta),
    };
    let ens_cfg = EnsembleConfig {
        noise,
        prior_scale,
        seed,
        ..cfg.ensemble.clone()
    };
    let ens = fit_ensemble(data, cfg.ensemble_size, &ens_cfg)?;
    let summaries = cfg
        .probes
        .iter()
        .map(|&x| {
            let p = ens.predict(&[x])?;
            let v: Vec<f64> = p.values.iter().map(|v| v[0]).collect();
            Ok(PredictiveSummary::from_samples(x, &v))
        })
        .collect::<Result<_>>()?;
    let residual = ens.train_residuals.iter().cloned().fold(0.0, f64::max);
    Ok((summaries, residual))
}

fn run_dropout(
    cfg: &DropoutTraining,
    data: &RegressionData,
    base: &RegressionData,
    probes: &[f64],
    seed: u64,
) -> Result<(Vec<PredictiveSummary>, f64)> {
    let net = train_dropout_net(data, cfg, seed)?;
    let predict_seed = derive_seed(seed, 0, "predict");
    let summaries = probes
        .iter()
        .map(|&x| dropout_predict(&net, x, cfg.keep_probability, cfg.samples, predict_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut sse = 0.0;
    for (x, y) in base.inputs().iter().zip(base.targets()) {
        let s = dropout_predict(&net, x[0], cfg.keep_probability, cfg.samples, predict_seed)?;
        sse += (s.mean - y[0]).powi(2);
    }
    Ok((summaries, sse / base.len() as f64))
}

impl Rows for GalleryRow {
    fn header() -> Vec<&'static str> {
        vec![
            "method",
            "data_scale",
            "x",
            "mean",
            "std",
            "count",
            "train_residual",
        ]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.method.name().to_string(),
            self.data_scale.to_string(),
            fmt(self.summary.x),
            fmt(self.summary.mean),
            fmt(self.summary.std),
            self.summary.count.to_string(),
            fmt(self.train_residual),
        ]]
    }
}
