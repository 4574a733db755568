//! Fitting `X ~ N(μ, σ²)` to a random target `Y` with the squared loss.
//!
//! `E[(X − Y)²] = (μ − μ_Y)² + σ² + σ_Y²` for independent `X` and `Y`, so the
//! minimizer puts all mass at `μ_Y`: no uncertainty survives the update.

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ViFit {
    pub mu: f64,
    pub sigma: f64,
    pub loss: f64,
    pub steps: usize,
}

const START: (f64, f64) = (0.0, 1.0);

/// Projected gradient descent on the analytic loss.
pub fn vi_squared_loss_minimize(mu_y: f64, sigma_y: f64) -> ViFit {
    let (mut mu, mut sigma) = START;
    let lr = 0.1;
    let steps = 500;
    for _ in 0..steps {
        let g_mu = 2.0 * (mu - mu_y);
        let g_sigma = 2.0 * sigma;
        mu -= lr * g_mu;
        sigma = (sigma - lr * g_sigma).max(0.0);
    }
    ViFit {
        mu,
        sigma,
        loss: (mu - mu_y).powi(2) + sigma * sigma + sigma_y * sigma_y,
        steps,
    }
}

/// Same objective estimated with `draws` fixed reparameterized samples
/// `X = μ + σz`, `Y = μ_Y + σ_Y u`.
pub fn vi_squared_loss_monte_carlo(mu_y: f64, sigma_y: f64, draws: usize, seed: u64) -> ViFit {
    let mut rng = rng_from_seed(seed);
    let zu: Vec<(f64, f64)> = (0..draws.max(1))
        .map(|_| {
            (
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    let n = zu.len() as f64;
    let (mut mu, mut sigma) = START;
    let lr = 0.1;
    let steps = 500;
    let mut loss = 0.0;
    for _ in 0..steps {
        let (mut g_mu, mut g_sigma) = (0.0, 0.0);
        loss = 0.0;
        for &(z, u) in &zu {
            let err = mu + sigma * z - mu_y - sigma_y * u;
            loss += err * err;
            g_mu += 2.0 * err;
            g_sigma += 2.0 * err * z;
        }
        loss /= n;
        mu -= lr * g_mu / n;
        sigma = (sigma - lr * g_sigma / n).max(0.0);
    }
    ViFit {
        mu,
        sigma,
        loss,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_fit_collapses() {
        let f = vi_squared_loss_minimize(1.0, 2.0);
        assert!((f.mu - 1.0).abs() < 1e-9 && f.sigma < 1e-9);
        assert!((f.loss - 4.0).abs() < 1e-9);
        let z = vi_squared_loss_minimize(0.0, 0.0);
        assert!(z.mu.abs() < 1e-12 && z.sigma < 1e-12);
    }

    #[test]
    fn monte_carlo_fit_collapses() {
        let f = vi_squared_loss_monte_carlo(1.0, 2.0, 20_000, 3);
        assert!(f.sigma < 0.05, "{f:?}");
        assert!((f.mu - 1.0).abs() < 0.1, "{f:?}");
    }
}
