//! Benchmarks for the computational hot paths: unsafe-pair enumeration,
//! greedy altruist placement, closed-form density math, and the
//! discrete-event loop itself.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use dishsim_core::deployment::{
    greedy_set_cover_deploy, min_altruist_density, pair_coverage_probability, CandidateStrategy,
};
use dishsim_core::engine::{run, FlowSpec, ScenarioConfig, TrafficModel};
use dishsim_core::protocol::ProtocolVariant;
use dishsim_core::topology::{random_peers, MccMode, NetworkTopology};

fn topo(peers: usize, side: f64, seed: u64) -> NetworkTopology {
    random_peers(peers, side, side, 250.0, 500.0, seed).expect("layout")
}

fn bench_unsafe_pairs(c: &mut Criterion) {
    let t = topo(60, 1200.0, 1);
    c.bench_function("enumerate_ups/60_peers/psm", |b| {
        b.iter(|| black_box(&t).enumerate_ups(MccMode::PsmDeafTerminal))
    });
    c.bench_function("enumerate_ups/60_peers/awake", |b| {
        b.iter(|| black_box(&t).enumerate_ups(MccMode::NoPsm))
    });
}

fn bench_placement(c: &mut Criterion) {
    let t = topo(30, 900.0, 2);
    c.bench_function("greedy_set_cover/30_peers/arrangement", |b| {
        b.iter(|| greedy_set_cover_deploy(black_box(&t), MccMode::PsmDeafTerminal, CandidateStrategy::Arrangement))
    });
}

fn bench_density_math(c: &mut Criterion) {
    c.bench_function("density_math/grid", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let rho = min_altruist_density(black_box(p), 250.0).expect("valid target");
                acc += pair_coverage_probability(rho, 250.0, 250.0).expect("valid inputs");
            }
            acc
        })
    });
}

fn bench_simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_1s");
    group.sample_size(10);
    for (name, variant) in [
        ("dish_p", ProtocolVariant::DishP),
        ("non_dish_psm", ProtocolVariant::NonDishPsm),
    ] {
        group.bench_function(format!("20_peers/{name}"), |b| {
            b.iter(|| {
                let mut cfg = ScenarioConfig::new(topo(20, 600.0, 3), variant);
                cfg.n_data_channels = 3;
                cfg.flows = FlowSpec::Random { n: 20 };
                cfg.traffic = TrafficModel::Poisson { pkts_per_sec: 2.0 };
                cfg.duration_us = 1_000_000;
                cfg.master_seed = 3;
                run(&cfg).expect("run")
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_unsafe_pairs,
    bench_placement,
    bench_density_math,
    bench_simulation
);
criterion_main!(benches);
