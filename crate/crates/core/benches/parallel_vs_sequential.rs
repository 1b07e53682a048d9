//! Sequential against rayon execution for the two batch workloads:
//! equivalence batteries over random games and the pruning experiment.

use std::hint::black_box;

use agentcycle::conversions::{check_equivalence, posg_to_aec};
use agentcycle::envs::{PursuitConfig, RewardMode};
use agentcycle::exec::Execution;
use agentcycle::formal::{battery, random_posg, GenParams};
use agentcycle::harness::pruning_experiment;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn equivalence(c: &mut Criterion) {
    let params = GenParams { max_states: 3, max_agents: 3, max_actions: 2, max_observations: 2, stochastic_rewards: false };
    let games: Vec<_> = (0..20)
        .map(|seed| {
            let posg = random_posg(&params, seed);
            let aec = posg_to_aec(&posg).expect("converts");
            let profiles = battery(&posg.actions, &posg.observations, seed);
            (posg, aec, profiles)
        })
        .collect();
    let mut group = c.benchmark_group("equivalence_battery");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                for (posg, aec, profiles) in &games {
                    black_box(check_equivalence(posg, aec, profiles, 3, 1e-9, exec).expect("checks"));
                }
            })
        });
    }
    group.finish();
}

fn pruning(c: &mut Criterion) {
    let config = PursuitConfig::small(RewardMode::Unpruned);
    let mut group = c.benchmark_group("pruning_experiment");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(pruning_experiment(&config, 16, 0, 8, exec).expect("runs")))
        });
    }
    group.finish();
}

criterion_group!(benches, equivalence, pruning);
criterion_main!(benches);
