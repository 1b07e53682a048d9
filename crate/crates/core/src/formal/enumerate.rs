//! Exact forward enumeration of state distributions and expected returns.
//!
//! Observations are marginalized analytically: an agent's action distribution
//! given the hidden state is `Σ_ω O(ω) π(ω, ·)`. Agents act independently
//! given the state, so the product of these marginals is exact.

use std::collections::BTreeMap;

use super::policy::PolicyProfile;
use super::validate::{compile_aec, compile_posg, CompiledAec, CompiledPosg};
use super::{AecSpec, FormalError, PosgSpec};

/// Default cap on weighted branches per step.
pub const DEFAULT_BRANCH_CAP: usize = 1_000_000;

/// POSG enumeration key: hidden state plus the encoded previous joint action,
/// which the observation function may read. `prev` is 0 before the first step
/// and whenever no agent's observation depends on its previous action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PosgKey {
    pub state: usize,
    pub prev: usize,
}

/// AEC enumeration key: state, the actor about to move, and (when tracked) the
/// reward vector produced by the previous step.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AecKey {
    pub state: usize,
    pub actor: usize,
    rewards: Vec<u64>,
}

impl AecKey {
    /// Last step's rewards for agents `1..=N`; empty when rewards were not tracked.
    pub fn reward_vector(&self) -> Vec<f64> {
        self.rewards.iter().map(|&b| f64::from_bits(b)).collect()
    }
}

fn reward_bits(r: f64) -> u64 {
    // Adding +0.0 maps -0.0 to +0.0 so equal rewards share a key.
    (r + 0.0).to_bits()
}

/// Distributions and expected cumulative returns after each of `0..=steps` steps.
#[derive(Clone, Debug, Default)]
pub struct PosgSeries {
    pub dists: Vec<BTreeMap<PosgKey, f64>>,
    /// `returns[t][i]` for POSG agent `i`.
    pub returns: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default)]
pub struct AecSeries {
    pub dists: Vec<BTreeMap<AecKey, f64>>,
    /// `returns[t][k]` for AEC agent `k + 1`.
    pub returns: Vec<Vec<f64>>,
}

fn marginal<K>(dist: &BTreeMap<K, f64>, state_of: impl Fn(&K) -> usize) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for (k, &p) in dist {
        *out.entry(state_of(k)).or_insert(0.0) += p;
    }
    out
}

impl PosgSeries {
    pub fn state_marginal(&self, t: usize) -> BTreeMap<usize, f64> {
        marginal(&self.dists[t], |k| k.state)
    }
}

impl AecSeries {
    pub fn state_marginal(&self, t: usize) -> BTreeMap<usize, f64> {
        marginal(&self.dists[t], |k| k.state)
    }
}

/// Half the L1 distance; keys missing on one side count as probability 0.
pub fn total_variation<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, &p) in a {
        sum += (p - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &q) in b {
        if !a.contains_key(k) {
            sum += q.abs();
        }
    }
    0.5 * sum
}

fn obs_reads_action(c: &CompiledPosg) -> bool {
    (0..c.n_agents).any(|i| (1..c.actions[i]).any(|a| c.obs_fn[i][a] != c.obs_fn[i][0]))
}

pub fn enumerate_posg(
    c: &CompiledPosg,
    profile: &PolicyProfile,
    steps: usize,
    cap: usize,
) -> Result<PosgSeries, FormalError> {
    profile.check(&c.actions, &c.observations)?;
    let track_prev = obs_reads_action(c);
    let n = c.n_agents;
    let mut series = PosgSeries::default();
    let mut dist = BTreeMap::from([(PosgKey { state: c.initial, prev: 0 }, 1.0)]);
    let mut ret = vec![0.0; n];
    series.dists.push(dist.clone());
    series.returns.push(ret.clone());

    for _ in 0..steps {
        let mut next: BTreeMap<PosgKey, f64> = BTreeMap::new();
        let mut branches = 0usize;
        for (key, &q) in &dist {
            let prev = c.decode(key.prev);
            // Per-agent action marginals given the hidden state.
            let margins: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let policy = &profile.policies[i];
                    let mut m = vec![0.0; c.actions[i]];
                    for &(obs, po) in &c.obs_fn[i][prev[i]][key.state] {
                        for (a, slot) in m.iter_mut().enumerate() {
                            *slot += po * policy.prob(obs, a);
                        }
                    }
                    m
                })
                .collect();
            for j in 0..c.n_joint {
                let joint = c.decode(j);
                let pj: f64 = joint.iter().enumerate().map(|(i, &a)| margins[i][a]).product();
                if pj == 0.0 {
                    continue;
                }
                for b in c.row(key.state, j) {
                    let w = q * pj * b.p;
                    branches += 1;
                    for (r, &v) in ret.iter_mut().zip(&b.rewards) {
                        *r += w * v;
                    }
                    let k = PosgKey { state: b.next, prev: if track_prev { j } else { 0 } };
                    *next.entry(k).or_insert(0.0) += w;
                }
            }
            if branches > cap {
                return Err(FormalError::StateSpaceExplosion { branches, cap });
            }
        }
        dist = next;
        series.dists.push(dist.clone());
        series.returns.push(ret.clone());
    }
    Ok(series)
}

/// Enumerates `steps` AEC steps from `(initial, first_actor)`. With
/// `track_rewards` the key also carries the last step's sampled reward vector,
/// enumerating every reward outcome.
pub fn enumerate_aec(
    c: &CompiledAec,
    profile: &PolicyProfile,
    steps: usize,
    track_rewards: bool,
    cap: usize,
) -> Result<AecSeries, FormalError> {
    profile.check(&c.actions[1..], &c.observations[1..])?;
    let n = c.n_agents;
    let initial_rewards = if track_rewards { vec![reward_bits(0.0); n] } else { Vec::new() };
    let mut series = AecSeries::default();
    let mut dist = BTreeMap::from([(
        AecKey { state: c.initial, actor: c.first_actor, rewards: initial_rewards },
        1.0,
    )]);
    let mut ret = vec![0.0; n];
    series.dists.push(dist.clone());
    series.returns.push(ret.clone());

    for _ in 0..steps {
        let mut next: BTreeMap<AecKey, f64> = BTreeMap::new();
        let mut branches = 0usize;
        for (key, &q) in &dist {
            let (s, j) = (key.state, key.actor);
            for a in 0..c.actions[j] {
                let pa = if j == 0 {
                    1.0
                } else {
                    let policy = &profile.policies[j - 1];
                    c.obs_fn[j][s].iter().map(|&(obs, po)| po * policy.prob(obs, a)).sum()
                };
                if pa == 0.0 {
                    continue;
                }
                for (s2, ps) in c.successors(s, j, a) {
                    let base = q * pa * ps;
                    for (i, r) in ret.iter_mut().enumerate() {
                        *r += base * c.expected_reward(i + 1, s, j, a, s2);
                    }
                    let outcomes: Vec<(Vec<u64>, f64)> = if track_rewards {
                        reward_outcomes(c, s, j, a, s2)
                    } else {
                        vec![(Vec::new(), 1.0)]
                    };
                    for &(j2, pn) in &c.nu[s][j][a] {
                        for (rv, pr) in &outcomes {
                            branches += 1;
                            let k = AecKey { state: s2, actor: j2, rewards: rv.clone() };
                            *next.entry(k).or_insert(0.0) += base * pn * pr;
                        }
                    }
                }
            }
            if branches > cap {
                return Err(FormalError::StateSpaceExplosion { branches, cap });
            }
        }
        dist = next;
        series.dists.push(dist.clone());
        series.returns.push(ret.clone());
    }
    Ok(series)
}

/// Every joint reward outcome `(r_1..r_N)` of one step with its probability.
fn reward_outcomes(c: &CompiledAec, s: usize, j: usize, a: usize, s2: usize) -> Vec<(Vec<u64>, f64)> {
    let mut out = vec![(Vec::new(), 1.0)];
    for i in 1..=c.n_agents {
        let dist = c.reward_dist(i, s, j, a, s2);
        out = out
            .into_iter()
            .flat_map(|(prefix, p)| {
                dist.iter().map(move |&(v, pv)| {
                    let mut rv = prefix.clone();
                    rv.push(reward_bits(v));
                    (rv, p * pv)
                })
            })
            .collect();
    }
    out
}

/// State distribution and expected cumulative returns after `steps` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub states: BTreeMap<usize, f64>,
    pub expected_returns: Vec<f64>,
}

pub fn enumerate_posg_distribution(
    spec: &PosgSpec,
    profile: &PolicyProfile,
    steps: usize,
) -> Result<Distribution, FormalError> {
    let c = compile_posg(spec)?;
    let series = enumerate_posg(&c, profile, steps, DEFAULT_BRANCH_CAP)?;
    Ok(Distribution { states: series.state_marginal(steps), expected_returns: series.returns[steps].clone() })
}

pub fn enumerate_aec_distribution(
    spec: &AecSpec,
    profile: &PolicyProfile,
    steps: usize,
) -> Result<Distribution, FormalError> {
    let c = compile_aec(spec)?;
    let series = enumerate_aec(&c, profile, steps, false, DEFAULT_BRANCH_CAP)?;
    Ok(Distribution { states: series.state_marginal(steps), expected_returns: series.returns[steps].clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::spec::*;

    /// 1 agent, 1 action; states 0 → 1 → 2 → 3 → 3.
    pub(crate) fn chain() -> PosgSpec {
        PosgSpec {
            num_states: 4,
            initial_state: 0,
            num_agents: 1,
            actions: vec![1],
            observations: vec![1],
            transitions: (0..4)
                .map(|s| PosgTransition { state: s, joint: vec![0], next: (s + 1).min(3), p: 1.0 })
                .collect(),
            rewards: vec![PosgReward { agent: 0, state: 0, joint: vec![0], next: 1, value: 2.0 }],
            observation_fn: (0..4)
                .map(|s| PosgObservation { agent: 0, action: 0, state: s, obs: 0, p: 1.0 })
                .collect(),
            derivation: None,
        }
    }

    #[test]
    fn deterministic_chain() {
        let spec = chain();
        let d = enumerate_posg_distribution(&spec, &PolicyProfile::uniform(&[1], &[1]), 2).unwrap();
        assert_eq!(d.states, BTreeMap::from([(2, 1.0)]));
        assert_eq!(d.expected_returns, vec![2.0]);
    }

    #[test]
    fn uniform_two_agent_posg_sums_all_eight_branches() {
        // P uniform over 2 states from every (s, joint); R_0 = a_0 + a_1 + s'.
        let mut spec = PosgSpec {
            num_states: 2,
            initial_state: 0,
            num_agents: 2,
            actions: vec![2, 2],
            observations: vec![1, 1],
            transitions: vec![],
            rewards: vec![],
            observation_fn: vec![],
            derivation: None,
        };
        for s in 0..2 {
            for a0 in 0..2 {
                for a1 in 0..2 {
                    for s2 in 0..2 {
                        spec.transitions.push(PosgTransition { state: s, joint: vec![a0, a1], next: s2, p: 0.5 });
                        spec.rewards.push(PosgReward {
                            agent: 0, state: s, joint: vec![a0, a1], next: s2,
                            value: (a0 + a1 + s2) as f64,
                        });
                    }
                }
            }
            for i in 0..2 {
                for a in 0..2 {
                    spec.observation_fn.push(PosgObservation { agent: i, action: a, state: s, obs: 0, p: 1.0 });
                }
            }
        }
        let profile = PolicyProfile::uniform(&[2, 2], &[1, 1]);
        let d = enumerate_posg_distribution(&spec, &profile, 1).unwrap();
        assert_eq!(d.states, BTreeMap::from([(0, 0.5), (1, 0.5)]));
        // Each of the 8 (a0, a1, s') branches has weight 1/8.
        let brute: f64 = (0..8).map(|b| ((b >> 2) + ((b >> 1) & 1) + (b & 1)) as f64 / 8.0).sum();
        assert!((d.expected_returns[0] - brute).abs() < 1e-12);
        assert_eq!(d.expected_returns[1], 0.0);
    }

    #[test]
    fn env_coin_flip_splits_mass() {
        let spec = AecSpec {
            num_states: 3,
            initial_state: 0,
            num_agents: 1,
            first_actor: 0,
            actions: vec![1],
            observations: vec![1],
            agent_transitions: (0..3).map(|s| AgentTransition { agent: 1, state: s, action: 0, next: s }).collect(),
            env_transitions: vec![
                EnvTransition { state: 0, next: 1, p: 0.5 },
                EnvTransition { state: 0, next: 2, p: 0.5 },
                EnvTransition { state: 1, next: 1, p: 1.0 },
                EnvTransition { state: 2, next: 2, p: 1.0 },
            ],
            reward_sets: None,
            rewards: vec![],
            observation_fn: (0..3).map(|s| AecObservation { agent: 1, state: s, obs: 0, p: 1.0 }).collect(),
            next_agent: (0..3)
                .flat_map(|s| (0..2).map(move |j| NextAgent { state: s, actor: j, action: 0, next: 1 - j, p: 1.0 }))
                .collect(),
            derivation: None,
        };
        let d = enumerate_aec_distribution(&spec, &PolicyProfile::uniform(&[1], &[1]), 1).unwrap();
        assert_eq!(d.states, BTreeMap::from([(1, 0.5), (2, 0.5)]));
    }

    #[test]
    fn cap_is_enforced() {
        let c = compile_posg(&chain()).unwrap();
        let err = enumerate_posg(&c, &PolicyProfile::uniform(&[1], &[1]), 3, 0).unwrap_err();
        assert!(matches!(err, FormalError::StateSpaceExplosion { cap: 0, .. }));
    }

    #[test]
    fn total_variation_counts_one_sided_keys() {
        let a = BTreeMap::from([(0, 1.0)]);
        let b = BTreeMap::from([(1, 1.0)]);
        assert_eq!(total_variation(&a, &b), 1.0);
        assert_eq!(total_variation(&a, &a), 0.0);
    }
}
