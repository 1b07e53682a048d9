//! Sampled trajectories agree with exact enumeration.
//!
//! Each file runs roughly 60 binomial comparisons, so the per-comparison bound
//! is four standard errors: the family-wise false-alarm rate stays near 0.5%.

use agentcycle::formal::{
    compile_aec, compile_posg, enumerate_aec, enumerate_posg, random_aec, random_posg, simulate_aec,
    simulate_posg, GenParams, PolicyProfile, DEFAULT_BRANCH_CAP,
};

const RUNS: usize = 10_000;
const Z: f64 = 4.0;
const HORIZON: usize = 3;

/// Binomial proportion check with a floor for near-degenerate probabilities.
fn within_bound(p: f64, hits: usize, runs: usize) -> bool {
    let freq = hits as f64 / runs as f64;
    let se = (p * (1.0 - p) / runs as f64).sqrt();
    (freq - p).abs() <= Z * se + 1.0 / runs as f64
}

#[test]
fn posg_state_frequencies_match_enumeration() {
    let mut checked = 0;
    for seed in 0..4 {
        let spec = random_posg(&GenParams::default(), seed);
        let c = compile_posg(&spec).unwrap();
        let profile = PolicyProfile::uniform(&spec.actions, &spec.observations);
        let exact = enumerate_posg(&c, &profile, HORIZON, DEFAULT_BRANCH_CAP).unwrap();
        let samples: Vec<_> = (0..RUNS).map(|k| simulate_posg(&spec, &profile, HORIZON, 100_000 * seed + k as u64).unwrap()).collect();
        for t in 1..=HORIZON {
            for (state, p) in exact.state_marginal(t) {
                let hits = samples.iter().filter(|s| s.states[t] == state).count();
                assert!(within_bound(p, hits, RUNS), "seed {seed} t {t} state {state}: p {p}, hits {hits}");
                checked += 1;
            }
            for agent in 0..spec.num_agents {
                let mean: f64 = samples.iter().map(|s| s.rewards[..t].iter().map(|r| r[agent]).sum::<f64>()).sum::<f64>() / RUNS as f64;
                let var: f64 = samples
                    .iter()
                    .map(|s| (s.rewards[..t].iter().map(|r| r[agent]).sum::<f64>() - mean).powi(2))
                    .sum::<f64>()
                    / RUNS as f64;
                let se = (var / RUNS as f64).sqrt();
                let expected = exact.returns[t][agent];
                assert!((mean - expected).abs() <= Z * se + 1e-9, "seed {seed} t {t} agent {agent}: {mean} vs {expected}");
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn aec_state_frequencies_match_enumeration() {
    let params = GenParams { stochastic_rewards: true, ..GenParams::default() };
    for seed in 0..4 {
        let spec = random_aec(&params, seed);
        let c = compile_aec(&spec).unwrap();
        let profile = PolicyProfile::uniform(&spec.actions, &spec.observations);
        let steps = 5;
        let sim_steps = steps + 1;
        let exact = enumerate_aec(&c, &profile, steps, false, DEFAULT_BRANCH_CAP).unwrap();
        let samples: Vec<_> = (0..RUNS).map(|k| simulate_aec(&spec, &profile, sim_steps, 7 + 100_000 * seed + k as u64).unwrap()).collect();
        for t in 1..=steps {
            for (key, p) in &exact.dists[t] {
                let hits = samples.iter().filter(|s| s.states[t] == key.state && actor_after(s, t) == key.actor).count();
                assert!(within_bound(*p, hits, RUNS), "seed {seed} t {t} {key:?}: p {p}, hits {hits}");
            }
        }
    }
}

/// Actor selected after `t` steps: the one that took step `t + 1`, sampled one further.
fn actor_after(s: &agentcycle::formal::SpecTrajectory, t: usize) -> usize {
    s.actors.get(t).copied().unwrap_or(usize::MAX)
}
