//! Experiment orchestration: configs, seeded cells, the time-to-learn
//! metric, parallel sweeps, summaries and CSV output.

mod config;
mod emit;
mod summary;

pub use config::{Cell, CellSpec, ExperimentConfig, Grid, LearnedRule, RunSettings};
pub use emit::{emit, read_curve, write_csv, CURVE_HEADER, RESULTS_HEADER};
pub use summary::{loglog_slope, median_with_unsolved, scaling, summarize, ScalingRow, SummaryRow};

use std::time::Instant;

use rayon::prelude::*;

use crate::agents::{make_agent, Trainer};
use crate::env::make_env;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Smallest 1-based episode `e ≥ window` whose trailing mean regret over
/// episodes `(e − window, e]` is below `threshold`.
pub fn time_to_learn(regrets: &[f64], threshold: f64, window: usize) -> Option<usize> {
    if window == 0 {
        return None;
    }
    (window..=regrets.len()).find(|&e| trailing_mean(&regrets[..e], window) < threshold)
}

/// Mean of the last `window` entries (exactly as the learned rule sums them).
fn trailing_mean(values: &[f64], window: usize) -> f64 {
    values[values.len() - window..].iter().sum::<f64>() / window as f64
}

/// One row of a learning curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub episode_return: f64,
    pub regret: Option<f64>,
}

/// Outcome of one (config, seed) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub cell_index: usize,
    pub config_hash: String,
    pub env_kind: String,
    pub n: Option<usize>,
    pub agent: String,
    pub k: Option<usize>,
    pub beta: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub eps0: Option<f64>,
    pub seed: u64,
    pub time_to_learn: Option<usize>,
    pub final_trailing_regret: Option<f64>,
    pub wallclock_s: Option<f64>,
    pub curve: Vec<CurvePoint>,
    pub error: Option<String>,
}

impl ExperimentRecord {
    fn blank(cell: &Cell) -> Self {
        let a = &cell.spec.agent;
        Self {
            cell_index: cell.index,
            config_hash: cell.hash.clone(),
            env_kind: cell.spec.env.kind().to_string(),
            n: cell.spec.env.scale(),
            agent: a.kind.name().to_string(),
            k: a.effective_k(),
            beta: a.effective_beta(),
            lambda_reg: a.effective_lambda_reg(),
            eps0: a.effective_eps0(),
            seed: cell.seed,
            time_to_learn: None,
            final_trailing_regret: None,
            wallclock_s: None,
            curve: Vec::new(),
            error: None,
        }
    }

    pub fn learned(&self) -> bool {
        self.time_to_learn.is_some()
    }
}

/// Run the learn / act loop for one cell. Environment and agent seeds are
/// derived from the cell seed.
pub fn run_cell(cell: &Cell, record_wallclock: bool) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let spec = &cell.spec;
    let wrap = |e: Error| Error::Config(format!("cell {} ({}): {e}", cell.index, cell.hash));
    let mut env = make_env(&spec.env, derive_seed(cell.seed, 0, "env")).map_err(wrap)?;
    let agent = make_agent(
        &spec.agent,
        env.as_ref(),
        derive_seed(cell.seed, 0, "agent"),
    )
    .map_err(wrap)?;
    let mut trainer = Trainer::new(agent, spec.agent.learn_every_steps);
    let optimal = env.optimal_return();
    let mut record = ExperimentRecord::blank(cell);
    let mut regrets = Vec::new();
    let rule = spec.learned;
    for episode in 1..=spec.budget {
        let out = trainer.run_episode(env.as_mut())?;
        let regret = optimal.map(|o| o - out.episode_return);
        record.curve.push(CurvePoint {
            episode,
            episode_return: out.episode_return,
            regret,
        });
        if let Some(r) = regret {
            regrets.push(r);
            if record.time_to_learn.is_none()
                && regrets.len() >= rule.window
                && trailing_mean(&regrets, rule.window) < rule.threshold
            {
                record.time_to_learn = Some(regrets.len());
                if spec.early_stop {
                    break;
                }
            }
        }
    }
    if !regrets.is_empty() {
        let tail = &regrets[regrets.len().saturating_sub(rule.window)..];
        record.final_trailing_regret = Some(tail.iter().sum::<f64>() / tail.len() as f64);
    }
    if record_wallclock {
        record.wallclock_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(record)
}

/// Cell records plus per-config summaries and scaling fits.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    pub scaling: Vec<ScalingRow>,
}

impl SweepOutput {
    pub fn from_records(records: Vec<ExperimentRecord>) -> Self {
        let summary = summarize(&records);
        let scaling = scaling(&summary);
        Self {
            records,
            summary,
            scaling,
        }
    }

    pub fn has_errors(&self) -> bool {
        self.records.iter().any(|r| r.error.is_some())
    }
}

/// Run every cell on a pool of `workers` threads. Failed cells become error
/// rows; output order is cell order regardless of scheduling.
pub fn sweep(
    config: &ExperimentConfig,
    workers: usize,
    progress: &(dyn Fn(&ExperimentRecord) + Sync),
) -> Result<SweepOutput> {
    config.validate()?;
    let cells = config.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let wallclock = config.experiment.record_wallclock;
    let records: Vec<ExperimentRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let rec = run_cell(cell, wallclock).unwrap_or_else(|e| ExperimentRecord {
                    error: Some(e.to_string()),
                    ..ExperimentRecord::blank(cell)
                });
                progress(&rec);
                rec
            })
            .collect()
    });
    Ok(SweepOutput::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent transcription of the rule with explicit index loops.
    fn brute(regrets: &[f64], threshold: f64, window: usize) -> Option<usize> {
        for e in window..=regrets.len() {
            let mut total = 0.0;
            for r in &regrets[e - window..e] {
                total += r;
            }
            if total / (window as f64) < threshold {
                return Some(e);
            }
        }
        None
    }

    #[test]
    fn constant_high_regret_never_learns() {
        assert_eq!(time_to_learn(&[0.99; 1000], 0.9, 100), None);
    }

    #[test]
    fn step_curve_matches_window_arithmetic() {
        let mut r = vec![0.99; 500];
        r.extend(vec![0.0; 500]);
        // After e > 500 the window holds (600 − e) high episodes; need
        // 0.99·(600 − e)/100 < 0.9, i.e. e > 509.09.
        assert_eq!(time_to_learn(&r, 0.9, 100), Some(510));
        assert_eq!(brute(&r, 0.9, 100), Some(510));
    }

    #[test]
    fn window_one_finds_first_zero() {
        let mut r = vec![1.0; 37];
        r.push(0.0);
        assert_eq!(time_to_learn(&r, 0.9, 1), Some(38));
    }

    #[test]
    fn short_curves_never_learn() {
        assert_eq!(time_to_learn(&[0.0; 99], 0.9, 100), None);
        assert_eq!(time_to_learn(&[0.0; 100], 0.9, 100), Some(100));
    }

    proptest::proptest! {
        #[test]
        fn agrees_with_brute_force(
            r in proptest::collection::vec(proptest::prop_oneof![proptest::strategy::Just(0.0), proptest::strategy::Just(0.99), 0.0f64..1.0], 0..400),
            w in 1usize..50,
        ) {
            proptest::prop_assert_eq!(time_to_learn(&r, 0.9, w), brute(&r, 0.9, w));
        }
    }
}
