use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use randprior::agents::{make_agent, AgentConfig, AgentKind, Trainer};
use randprior::env::{make_env, ChainEnv, EnvSpec};
use randprior::nn::{Features, Mlp, Workspace};
use randprior::Environment;

fn forward_backward(c: &mut Criterion) {
    let net = Mlp::glorot(&[5, 50, 50, 3], 1).unwrap();
    let x = [0.3, -0.2, 1.0, 0.1, -0.5];
    let mut ws = Workspace::default();
    let mut grad = vec![0.0; net.num_params()];
    c.bench_function("mlp_forward_5x50x50x3", |b| {
        b.iter(|| black_box(net.forward_ws(Features::Dense(black_box(&x)), None, &mut ws)[0]))
    });
    c.bench_function("mlp_forward_backward_5x50x50x3", |b| {
        b.iter(|| {
            net.forward_ws(Features::Dense(&x), None, &mut ws);
            net.backward(&mut ws, &[1.0, 0.0, -1.0], &mut grad);
        })
    });
}

fn warmed_trainer(kind: AgentKind, size: usize) -> (Trainer, Box<dyn Environment>) {
    let mut env = make_env(&EnvSpec::Chain { size }, 3).unwrap();
    let agent = make_agent(&AgentConfig::with_kind(kind), env.as_ref(), 4).unwrap();
    let mut trainer = Trainer::new(agent, None);
    for _ in 0..50 {
        trainer.run_episode(env.as_mut()).unwrap();
    }
    (trainer, env)
}

fn chain_episodes(c: &mut Criterion) {
    let mut group = c.benchmark_group("chain_episode");
    for kind in [AgentKind::Bsp, AgentKind::EpsGreedy] {
        for size in [10, 20] {
            group.bench_function(format!("{}_n{size}", kind.name()), |b| {
                b.iter_batched_ref(
                    || warmed_trainer(kind, size),
                    |(trainer, env)| trainer.run_episode(env.as_mut()).unwrap(),
                    BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

fn chain_step(c: &mut Criterion) {
    let mut env = ChainEnv::new(20, 1).unwrap();
    c.bench_function("chain_env_episode_n20", |b| {
        b.iter(|| {
            env.reset();
            while !env.step(1).unwrap().is_terminal() {}
        })
    });
}

criterion_group!(benches, forward_backward, chain_episodes, chain_step);
criterion_main!(benches);
