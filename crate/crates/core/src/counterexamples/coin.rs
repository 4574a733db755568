//! Bayesian belief about a coin's bias versus the distribution of its outcomes.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::{fmt, Rows};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoinReport {
    pub n_heads: u64,
    pub n_tails: u64,
    /// `(p, Beta(n_heads + 1, n_tails + 1) density)` on `bins + 1` grid points.
    pub posterior: Vec<(f64, f64)>,
    pub posterior_mean: f64,
    pub posterior_std: f64,
    /// Trapezoid integral of the density over the grid.
    pub integral: f64,
    /// Empirical outcome distribution: mass at 0 and at 1 (NaN with no data).
    pub mass_zero: f64,
    pub mass_one: f64,
    pub distributional_std: f64,
}

fn ln_beta_density(p: f64, a: f64, b: f64) -> f64 {
    // 0·ln 0 is taken as 0 so that a = 1 or b = 1 stays finite at the edges.
    let term = |k: f64, q: f64| if k == 0.0 { 0.0 } else { k * q.ln() };
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + term(a - 1.0, p) + term(b - 1.0, 1.0 - p)
}

pub fn coin_distributions(n_heads: u64, n_tails: u64, bins: usize) -> CoinReport {
    let bins = bins.max(1);
    let a = n_heads as f64 + 1.0;
    let b = n_tails as f64 + 1.0;
    let posterior: Vec<(f64, f64)> = (0..=bins)
        .map(|j| {
            let p = j as f64 / bins as f64;
            (p, ln_beta_density(p, a, b).exp())
        })
        .collect();
    let h = 1.0 / bins as f64;
    let integral = posterior
        .windows(2)
        .map(|w| 0.5 * h * (w[0].1 + w[1].1))
        .sum();
    let s = a + b;
    let total = (n_heads + n_tails) as f64;
    let mass_one = n_heads as f64 / total;
    CoinReport {
        n_heads,
        n_tails,
        posterior,
        posterior_mean: a / s,
        posterior_std: (a * b / (s * s * (s + 1.0))).sqrt(),
        integral,
        mass_zero: n_tails as f64 / total,
        mass_one,
        distributional_std: (mass_one * (1.0 - mass_one)).sqrt(),
    }
}

impl Rows for CoinReport {
    fn header() -> Vec<&'static str> {
        vec!["n_heads", "n_tails", "kind", "value", "density"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let h = self.n_heads.to_string();
        let t = self.n_tails.to_string();
        let mut rows: Vec<Vec<String>> = self
            .posterior
            .iter()
            .map(|(p, d)| vec![h.clone(), t.clone(), "posterior".into(), fmt(*p), fmt(*d)])
            .collect();
        rows.push(vec![
            h.clone(),
            t.clone(),
            "distributional".into(),
            "0".into(),
            fmt(self.mass_zero),
        ]);
        rows.push(vec![
            h,
            t,
            "distributional".into(),
            "1".into(),
            fmt(self.mass_one),
        ]);
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_data_gives_uniform_posterior() {
        let r = coin_distributions(0, 0, 100);
        assert!(r.posterior.iter().all(|(_, d)| (d - 1.0).abs() < 1e-12));
        assert!((r.integral - 1.0).abs() < 1e-12);
        assert!(r.mass_one.is_nan());
    }

    #[test]
    fn posterior_concentrates_and_distribution_does_not() {
        let r = coin_distributions(1000, 1000, 20_000);
        assert!((r.posterior_std - (0.25f64 / 2003.0).sqrt()).abs() < 1e-12);
        assert!((r.posterior_std - 0.0112).abs() < 1e-4);
        assert!((r.integral - 1.0).abs() < 1e-6, "{}", r.integral);
        assert_eq!((r.mass_zero, r.mass_one), (0.5, 0.5));
        let big = coin_distributions(4000, 4000, 20_000);
        let ratio = r.posterior_std / big.posterior_std;
        assert!((ratio - 2.0).abs() < 0.01, "{ratio}");
        assert_eq!(r.distributional_std, big.distributional_std);
    }

    #[test]
    fn grid_moments_match_closed_form() {
        let r = coin_distributions(30, 10, 20_000);
        let h = 1.0 / 20_000.0;
        let m: f64 = r
            .posterior
            .windows(2)
            .map(|w| 0.5 * h * (w[0].0 * w[0].1 + w[1].0 * w[1].1))
            .sum();
        assert!((m - r.posterior_mean).abs() < 1e-6);
    }
}
