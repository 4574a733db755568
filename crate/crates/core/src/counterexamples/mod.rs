//! Executable failure cases for rival posterior approximations, with the
//! contrasting behaviour of ensembles and exact Bayesian updates.
//!
//! Each operation is deterministic in its seed and returns plain structs that
//! convert to CSV rows via [`Rows`].

mod bandit;
mod coin;
mod dropout;
mod gallery;
mod vi;

pub use bandit::{
    bayes_ts_full_information, distributional_ts_regret, dropout_bandit_regret, BanditContrast,
    DropoutBanditConfig,
};
pub use coin::{coin_distributions, CoinReport};
pub use dropout::{
    dropout_closed_form, dropout_duplication_check, dropout_predict, dropout_theta_bar,
    ensemble_duplication_check, expected_dropout_loss, half_lambda_theta_bar, mask_sampled_ratio,
    train_dropout_net, DropoutClosedForm, DropoutDuplication, DropoutTraining,
};
pub use gallery::{gallery_data, regression_uncertainty_suite, GalleryRow, Method, SuiteConfig};
pub use vi::{vi_squared_loss_minimize, vi_squared_loss_monte_carlo, ViFit};

use serde::Serialize;

/// Sample statistics of a predictive distribution at one input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PredictiveSummary {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl PredictiveSummary {
    /// Mean and unbiased standard deviation of `samples`.
    pub fn from_samples(x: f64, samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                x,
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self {
            x,
            mean,
            std,
            count: n,
        }
    }
}

/// Cumulative pseudo-regret at increasing checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretCurve {
    pub label: String,
    pub horizon: usize,
    /// `(t, regret after t steps)`, starting at `(0, 0)`.
    pub points: Vec<(usize, f64)>,
}

impl RegretCurve {
    pub fn final_regret(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }

    /// Regret at checkpoint `t`, if recorded.
    pub fn at(&self, t: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == t).map(|p| p.1)
    }

    /// Pointwise mean of curves sharing the same checkpoints.
    pub fn average(label: &str, curves: &[RegretCurve]) -> Option<RegretCurve> {
        let first = curves.first()?;
        if curves.iter().any(|c| c.points.len() != first.points.len()) {
            return None;
        }
        let points = (0..first.points.len())
            .map(|i| {
                let t = first.points[i].0;
                let s: f64 = curves.iter().map(|c| c.points[i].1).sum();
                (t, s / curves.len() as f64)
            })
            .collect();
        Some(RegretCurve {
            label: label.to_string(),
            horizon: first.horizon,
            points,
        })
    }
}

/// Ten checkpoints per decade up to `horizon`, plus `horizon / 2` and `horizon`.
pub fn log_checkpoints(horizon: usize) -> Vec<usize> {
    let mut out = vec![0];
    let mut k = 0;
    loop {
        let t = 10f64.powf(k as f64 / 10.0).round() as usize;
        if t > horizon {
            break;
        }
        out.push(t);
        k += 1;
    }
    out.push(horizon / 2);
    out.push(horizon);
    out.sort_unstable();
    out.dedup();
    out
}

/// Tabular output: a header and stringified rows.
pub trait Rows {
    fn header() -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub(crate) fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NA".to_string()
    }
}

impl Rows for RegretCurve {
    fn header() -> Vec<&'static str> {
        vec!["agent", "t", "cumulative_regret"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|(t, r)| vec![self.label.clone(), t.to_string(), fmt(*r)])
            .collect()
    }
}
