use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nfvsched::approximator::{Activation, Mlp, NetShape};
use nfvsched::dypr::fit_ridge;
use nfvsched::embed::{embed_service, state_size};
use nfvsched::harness::{run_episode, Run};
use nfvsched::rng::seeded;
use nfvsched::workload::generate_batch;
use nfvsched::{
    DdqlAgent, DdqlConfig, EmbedParams, ScenarioConfig, SchedulerKind, SubstrateNetwork,
};
use rand::Rng;

fn mlp(c: &mut Criterion) {
    let mut rng = seeded(1);
    for (name, shape) in [
        ("2x64", NetShape::small(2, 64)),
        ("6x300", NetShape::default()),
    ] {
        let mut net = Mlp::new(
            &shape.sizes(4, 1),
            Activation::Sigmoid,
            Activation::Identity,
            &mut rng,
        );
        let batch: Vec<Vec<f64>> = (0..64)
            .map(|_| (0..4).map(|_| rng.random()).collect())
            .collect();
        let grads = vec![vec![1.0]; batch.len()];
        c.bench_function(&format!("mlp_forward_batch64_{name}"), |b| {
            b.iter(|| net.forward_batch(black_box(&batch)).unwrap())
        });
        c.bench_function(&format!("mlp_forward_backward_batch64_{name}"), |b| {
            b.iter(|| {
                net.forward_train(black_box(&batch)).unwrap();
                net.backward(black_box(&grads)).unwrap()
            })
        });
    }
}

fn ridge(c: &mut Criterion) {
    let mut rng = seeded(2);
    let x: Vec<Vec<f64>> = (0..33)
        .map(|_| (0..3).map(|_| rng.random()).collect())
        .collect();
    let y: Vec<f64> = (0..33).map(|_| rng.random()).collect();
    c.bench_function("ridge_fit_33x3", |b| {
        b.iter(|| fit_ridge(black_box(&x), black_box(&y), 0.1).unwrap())
    });
}

fn embed(c: &mut Criterion) {
    let net = SubstrateNetwork::builtin("netrail")
        .unwrap()
        .with_uniform_cpu(12);
    let h = net.node_count();
    let mut agent = DdqlAgent::new(
        DdqlConfig {
            shape: NetShape::small(2, 64),
            ..Default::default()
        },
        state_size(h),
        h,
        3,
    );
    let services = generate_batch(3, 64, &Default::default());
    let params = EmbedParams::default();
    let mut i = 0;
    c.bench_function("embed_service_netrail_greedy", |b| {
        b.iter_batched(
            || net.clone(),
            |mut n| {
                i = (i + 1) % services.len();
                agent.set_epsilon(0.0);
                embed_service(&mut agent, &mut n, &services[i], &params, false).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn episode(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::desk();
    cfg.ddpg.actor_shape = NetShape::small(2, 64);
    cfg.ddpg.critic_shape = NetShape::small(2, 64);
    cfg.ddql.shape = NetShape::small(2, 64);
    let mut group = c.benchmark_group("episode_desk");
    group.sample_size(10);
    for kind in [SchedulerKind::Priority, SchedulerKind::Ddpg] {
        let mut run = Run::new(&cfg, kind, 4).unwrap();
        let mut e = 0;
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| {
                e += 1;
                run_episode(&mut run, e).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, mlp, ridge, embed, episode);
criterion_main!(benches);
