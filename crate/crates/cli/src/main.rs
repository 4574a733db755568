use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod demos;

use randprior::agents::{AgentConfig, AgentKind};
use randprior::harness::{self, ExperimentConfig, ExperimentRecord, SweepOutput};
use randprior::EnvSpec;

#[derive(Parser)]
#[command(
    name = "randprior",
    version,
    about = "Randomized prior functions: experiments and demos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// TOML config file; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Demos print their main table to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Episode budget for experiments; horizon for bandit demos.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Chain sweep (default: BSP on N=10, 5 seeds).
    RunChain(Common),
    /// Cartpole swing-up run (default: BSP, 1 seed, 1000 episodes).
    RunCartpole(Common),
    /// Any experiment grid; requires --config.
    Sweep(Common),
    /// Sample-then-optimize samplers against the exact linear posterior,
    /// and the pseudocount-bonus misalignment case.
    SanityLinear(Common),
    /// Dropout spread under dataset duplication, with an ensemble contrast.
    DemoDropoutDup(Common),
    /// Squared-loss variational fit collapsing to zero variance.
    DemoViCollapse(Common),
    /// Posterior over a coin's bias versus its outcome distribution.
    DemoCoin(Common),
    /// Thompson sampling over return distributions.
    DemoDistributionalRegret(Common),
    /// Dropout Thompson sampling versus ensemble-with-prior on a bandit.
    DemoDropoutBandit(Common),
    /// Predictive spread of ensembles and dropout on a small regression set.
    DemoRegressionGallery(Common),
}

/// Exit 2 for configuration problems, 1 for everything else.
pub enum Failure {
    Config(String),
    Run(anyhow::Error),
}

impl From<randprior::Error> for Failure {
    fn from(e: randprior::Error) -> Self {
        match e {
            randprior::Error::Config(msg) => Failure::Config(msg),
            other => Failure::Run(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RunChain(c) => run_experiment(&c, Some(default_chain), "chain"),
        Command::RunCartpole(c) => run_experiment(&c, Some(default_cartpole), "cartpole"),
        Command::Sweep(c) => run_experiment(&c, None, ""),
        Command::SanityLinear(c) => demos::sanity_linear(&c),
        Command::DemoDropoutDup(c) => demos::dropout_dup(&c),
        Command::DemoViCollapse(c) => demos::vi_collapse(&c),
        Command::DemoCoin(c) => demos::coin(&c),
        Command::DemoDistributionalRegret(c) => demos::distributional_regret(&c),
        Command::DemoDropoutBandit(c) => demos::dropout_bandit(&c),
        Command::DemoRegressionGallery(c) => demos::regression_gallery(&c),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn default_chain() -> ExperimentConfig {
    ExperimentConfig::new(
        EnvSpec::Chain { size: 10 },
        AgentConfig::with_kind(AgentKind::Bsp),
    )
}

fn default_cartpole() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        EnvSpec::Cartpole {
            physics: Default::default(),
        },
        AgentConfig {
            hidden: vec![50, 50],
            learn_every_steps: Some(10),
            buffer_capacity: Some(100_000),
            ..AgentConfig::with_kind(AgentKind::Bsp)
        },
    );
    cfg.experiment.budget = 1000;
    cfg.experiment.seeds = 1;
    cfg
}

pub fn workers(c: &Common) -> usize {
    c.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn run_experiment(
    c: &Common,
    default: Option<fn() -> ExperimentConfig>,
    expected_kind: &str,
) -> Result<ExitCode, Failure> {
    let mut cfg = match (&c.config, default) {
        (Some(path), _) => {
            ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?
        }
        (None, Some(make)) => make(),
        (None, None) => return Err(Failure::Config("sweep needs --config <path>".into())),
    };
    if !expected_kind.is_empty() && cfg.env.kind() != expected_kind {
        return Err(Failure::Config(format!(
            "this subcommand runs {expected_kind} environments, config has {}",
            cfg.env.kind()
        )));
    }
    if let Some(seed) = c.seed {
        cfg.experiment.master_seed = seed;
    }
    if let Some(budget) = c.budget {
        cfg.experiment.budget = budget;
    }
    cfg.validate()?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let cells = cfg.cells().len();
    eprintln!("running {cells} cells on {} workers", workers(c));
    let progress = |r: &ExperimentRecord| {
        let status = match (&r.error, r.time_to_learn) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(t)) => format!("learned at episode {t}"),
            (None, None) => format!("not learned in {} episodes", r.curve.len()),
        };
        eprintln!(
            "[{}] {} N={} seed={}: {status}",
            r.config_hash,
            r.agent,
            na(r.n),
            r.seed
        );
    };
    let output = harness::sweep(&cfg, workers(c), &progress)?;
    harness::emit(&out, &output)?;
    print_summary(&output);
    eprintln!("wrote {}", out.display());
    Ok(if output.has_errors() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn na<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn print_summary(output: &SweepOutput) {
    println!("config_hash,agent,N,solved,seeds,median_time_to_learn");
    for s in &output.summary {
        println!(
            "{},{},{},{},{},{}",
            s.config_hash,
            s.agent,
            na(s.n),
            s.solved,
            s.seeds,
            na(s.median_time_to_learn)
        );
    }
}

/// Write a table to `<out>/<name>.csv`, or to stdout when no directory is
/// given and `primary` is set.
pub fn write_table(
    out: Option<&Path>,
    name: &str,
    header: &[&str],
    rows: &[Vec<String>],
    primary: bool,
) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .map_err(|e| Failure::Run(anyhow::anyhow!("creating {}: {e}", dir.display())))?;
            harness::write_csv(&dir.join(format!("{name}.csv")), header, rows)?;
        }
        None if primary => {
            println!("{}", header.join(","));
            for r in rows {
                println!("{}", r.join(","));
            }
        }
        None => {}
    }
    Ok(())
}
