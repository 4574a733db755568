use std::process::ExitCode;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use randprior::counterexamples::{
    bayes_ts_full_information, coin_distributions, distributional_ts_regret, dropout_bandit_regret,
    dropout_closed_form, dropout_duplication_check, ensemble_duplication_check, gallery_data,
    mask_sampled_ratio, regression_uncertainty_suite, vi_squared_loss_minimize,
    vi_squared_loss_monte_carlo, DropoutBanditConfig, DropoutClosedForm, DropoutDuplication,
    DropoutTraining, GalleryRow, RegretCurve, Rows, SuiteConfig,
};
use randprior::ensemble::{EnsembleConfig, NoiseProcedure};
use randprior::linear::{linear_sanity, misalignment_case, LinearGaussianModel};

use crate::{workers, write_table, Common, Failure};

fn load<T: DeserializeOwned + Default>(c: &Common) -> Result<T, Failure> {
    let Some(path) = &c.config else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn init_pool(c: &Common) {
    // Only fails if a global pool already exists, which is harmless here.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(c))
        .build_global();
}

fn table<R: Rows>(items: &[R]) -> Vec<Vec<String>> {
    items.iter().flat_map(Rows::rows).collect()
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NA".into()
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SanityDemo {
    n: usize,
    dim: usize,
    draws: usize,
    prior_scale: f64,
    noise_variance: f64,
}

impl Default for SanityDemo {
    fn default() -> Self {
        Self {
            n: 20,
            dim: 2,
            draws: 10_000,
            prior_scale: 1.0,
            noise_variance: 1.0,
        }
    }
}

pub fn sanity_linear(c: &Common) -> Result<ExitCode, Failure> {
    let cfg: SanityDemo = load(c)?;
    let seed = c.seed.unwrap_or(0);
    let model = LinearGaussianModel::isotropic(cfg.dim, cfg.prior_scale, cfg.noise_variance)?;
    let r = linear_sanity(&model, cfg.n, cfg.draws, seed)?;
    let rows: Vec<Vec<String>> = [
        ("regularized_fit", &r.regularized),
        ("prior_function", &r.prior_function),
    ]
    .iter()
    .map(|(name, m)| {
        vec![
            name.to_string(),
            m.samples.to_string(),
            num(m.max_mean_z()),
            num(m.covariance_rel_error),
            num(r.max_pathwise_gap),
        ]
    })
    .collect();
    let out = c.out.as_deref();
    write_table(
        out,
        "sanity_linear",
        &[
            "sampler",
            "draws",
            "max_mean_z",
            "covariance_rel_error",
            "max_pathwise_gap",
        ],
        &rows,
        true,
    )?;
    let m = misalignment_case(seed)?;
    let rows: Vec<Vec<String>> = m
        .probes
        .iter()
        .zip(&m.signals)
        .map(|(x, s)| {
            vec![
                num(x[0]),
                num(x[1]),
                num(s.posterior_reward_std),
                num(s.pseudocount_bonus),
            ]
        })
        .collect();
    write_table(
        out,
        "bonus_misalignment",
        &["x1", "x2", "posterior_reward_std", "pseudocount_bonus"],
        &rows,
        false,
    )?;
    eprintln!(
        "bonus vs posterior std rank correlation {:.3}; discordant pair {:?}",
        m.rank_correlation, m.discordant_pair
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DupDemo {
    factor: usize,
    probe: f64,
    ensemble_size: usize,
    dropout: DropoutTraining,
    ensemble: EnsembleConfig,
    closed_form: ClosedFormArgs,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ClosedFormArgs {
    d: usize,
    p: f64,
    lambda: f64,
    y_bar: f64,
    mask_samples: usize,
}

impl Default for ClosedFormArgs {
    fn default() -> Self {
        Self {
            d: 10,
            p: 0.5,
            lambda: 0.1,
            y_bar: 1.0,
            mask_samples: 100_000,
        }
    }
}

impl Default for DupDemo {
    fn default() -> Self {
        Self {
            factor: 10,
            probe: 0.9,
            ensemble_size: 30,
            dropout: DropoutTraining::default(),
            ensemble: EnsembleConfig {
                noise: NoiseProcedure::Bootstrap,
                ..EnsembleConfig::default()
            },
            closed_form: ClosedFormArgs::default(),
        }
    }
}

pub fn dropout_dup(c: &Common) -> Result<ExitCode, Failure> {
    let cfg: DupDemo = load(c)?;
    init_pool(c);
    let seed = c.seed.unwrap_or(0);
    let data = gallery_data();
    let dropout = dropout_duplication_check(&cfg.dropout, &data, cfg.factor, cfg.probe, seed)?;
    let ens_cfg = EnsembleConfig {
        seed,
        ..cfg.ensemble.clone()
    };
    let ensemble =
        ensemble_duplication_check(&ens_cfg, cfg.ensemble_size, &data, cfg.factor, cfg.probe)?;
    let out = c.out.as_deref();
    let rows = table(&[dropout.clone(), ensemble.clone()]);
    write_table(
        out,
        "dropout_duplication",
        &DropoutDuplication::header(),
        &rows,
        true,
    )?;
    let a = &cfg.closed_form;
    let cf = dropout_closed_form(a.d, a.p, a.lambda, a.y_bar)?;
    write_table(
        out,
        "dropout_closed_form",
        &DropoutClosedForm::header(),
        &cf.rows(),
        false,
    )?;
    let mc = mask_sampled_ratio(a.d, a.p, cf.theta_bar, a.mask_samples, seed);
    eprintln!(
        "std ratio dup/base: dropout {:.3}, ensemble {:.3}; closed form std/mean {:.5} (mask-sampled {:.5}); lambda/2 variant {}",
        dropout.std_ratio(),
        ensemble.std_ratio(),
        cf.std / cf.mean,
        mc.std / mc.mean,
        if cf.agrees_with_half_lambda { "agrees" } else { "disagrees" }
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ViDemo {
    mu_y: f64,
    sigma_y: f64,
    draws: usize,
}

impl Default for ViDemo {
    fn default() -> Self {
        Self {
            mu_y: 1.0,
            sigma_y: 2.0,
            draws: 100_000,
        }
    }
}

pub fn vi_collapse(c: &Common) -> Result<ExitCode, Failure> {
    let cfg: ViDemo = load(c)?;
    let fits = [
        ("analytic", vi_squared_loss_minimize(cfg.mu_y, cfg.sigma_y)),
        (
            "monte_carlo",
            vi_squared_loss_monte_carlo(cfg.mu_y, cfg.sigma_y, cfg.draws, c.seed.unwrap_or(0)),
        ),
    ];
    let rows: Vec<Vec<String>> = fits
        .iter()
        .map(|(name, f)| {
            vec![
                name.to_string(),
                num(cfg.mu_y),
                num(cfg.sigma_y),
                num(f.mu),
                num(f.sigma),
                num(f.loss),
                f.steps.to_string(),
            ]
        })
        .collect();
    write_table(
        c.out.as_deref(),
        "vi_collapse",
        &[
            "loss",
            "mu_y",
            "sigma_y",
            "mu",
            "sigma",
            "final_loss",
            "steps",
        ],
        &rows,
        true,
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CoinDemo {
    /// Each entry `n` observes `n` heads and `n` tails.
    counts: Vec<u64>,
    bins: usize,
}

impl Default for CoinDemo {
    fn default() -> Self {
        Self {
            counts: vec![0, 1, 10, 100, 1000],
            bins: 1000,
        }
    }
}

pub fn coin(c: &Common) -> Result<ExitCode, Failure> {
    let cfg: CoinDemo = load(c)?;
    let reports: Vec<_> = cfg
        .counts
        .iter()
        .map(|&n| coin_distributions(n, n, cfg.bins))
        .collect();
    let out = c.out.as_deref();
    write_table(
        out,
        "coin",
        &randprior::counterexamples::CoinReport::header(),
        &table(&reports),
        true,
    )?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n_heads.to_string(),
                r.n_tails.to_string(),
                num(r.posterior_mean),
                num(r.posterior_std),
                num(r.integral),
                num(r.distributional_std),
            ]
        })
        .collect();
    write_table(
        out,
        "coin_summary",
        &[
            "n_heads",
            "n_tails",
            "posterior_mean",
            "posterior_std",
            "grid_integral",
            "distributional_std",
        ],
        &rows,
        false,
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DistributionalDemo {
    eps: f64,
    horizon: usize,
}

impl Default for DistributionalDemo {
    fn default() -> Self {
        Self {
            eps: 0.1,
            horizon: 100_000,
        }
    }
}

pub fn distributional_regret(c: &Common) -> Result<ExitCode, Failure> {
    let mut cfg: DistributionalDemo = load(c)?;
    if let Some(b) = c.budget {
        cfg.horizon = b;
    }
    let curves = [
        distributional_ts_regret(cfg.eps, cfg.horizon, c.seed.unwrap_or(0))?,
        bayes_ts_full_information(cfg.eps, cfg.horizon)?,
    ];
    write_table(
        c.out.as_deref(),
        "distributional_regret",
        &RegretCurve::header(),
        &table(&curves),
        true,
    )?;
    eprintln!(
        "regret per step: distributional {:.4} (half the gap: {:.4}), bayes {:.4}",
        curves[0].final_regret() / cfg.horizon.max(1) as f64,
        0.5 * (0.5 - cfg.eps),
        curves[1].final_regret() / cfg.horizon.max(1) as f64
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BanditDemo {
    seeds: u64,
    bandit: DropoutBanditConfig,
}

impl Default for BanditDemo {
    fn default() -> Self {
        Self {
            seeds: 20,
            bandit: DropoutBanditConfig::default(),
        }
    }
}

pub fn dropout_bandit(c: &Common) -> Result<ExitCode, Failure> {
    let mut cfg: BanditDemo = load(c)?;
    if let Some(b) = c.budget {
        cfg.bandit.horizon = b;
    }
    if cfg.seeds == 0 {
        return Err(Failure::Config("seeds must be at least 1".into()));
    }
    let base = c.seed.unwrap_or(0);
    let (mut dropout, mut ensemble) = (Vec::new(), Vec::new());
    for s in 0..cfg.seeds {
        let r = dropout_bandit_regret(&cfg.bandit, base.wrapping_add(s))?;
        dropout.push(r.dropout);
        ensemble.push(r.ensemble);
    }
    let average = |label: &str, v: &[RegretCurve]| {
        RegretCurve::average(label, v)
            .ok_or_else(|| Failure::Run(anyhow::anyhow!("mismatched curves")))
    };
    let curves = [
        average("dropout_ts", &dropout)?,
        average("ensemble_prior_ts", &ensemble)?,
    ];
    write_table(
        c.out.as_deref(),
        "dropout_bandit",
        &RegretCurve::header(),
        &table(&curves),
        true,
    )?;
    let h = cfg.bandit.horizon;
    for curve in &curves {
        if let (Some(half), Some(full)) = (curve.at(h / 2), curve.at(h)) {
            eprintln!(
                "{}: regret({h})/regret({}) = {:.3}",
                curve.label,
                h / 2,
                full / half
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GalleryDemo {
    suite: SuiteConfig,
}

impl Default for GalleryDemo {
    fn default() -> Self {
        Self {
            suite: SuiteConfig {
                data_scales: vec![1, 10, 100],
                ..SuiteConfig::default()
            },
        }
    }
}

pub fn regression_gallery(c: &Common) -> Result<ExitCode, Failure> {
    let mut cfg: GalleryDemo = load(c)?;
    init_pool(c);
    if let Some(seed) = c.seed {
        cfg.suite.seed = seed;
    }
    let rows = regression_uncertainty_suite(&cfg.suite)?;
    write_table(
        c.out.as_deref(),
        "regression_gallery",
        &GalleryRow::header(),
        &table(&rows),
        true,
    )?;
    Ok(ExitCode::SUCCESS)
}
