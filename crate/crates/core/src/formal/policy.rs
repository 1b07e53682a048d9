//! Tabular agent behaviour: observation → action distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FormalError;

/// Enumerate every deterministic profile when there are at most this many.
pub const DETERMINISTIC_BATTERY_LIMIT: u128 = 16;
/// Size of the seeded stochastic battery used otherwise.
pub const STOCHASTIC_BATTERY_SIZE: usize = 8;

/// `table[obs][action]` probabilities; every row sums to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub table: Vec<Vec<f64>>,
}

impl Policy {
    pub fn uniform(n_obs: usize, n_actions: usize) -> Self {
        Self { table: vec![vec![1.0 / n_actions as f64; n_actions]; n_obs] }
    }

    /// `choices[obs]` is played with probability one.
    pub fn deterministic(choices: &[usize], n_actions: usize) -> Self {
        let table = choices
            .iter()
            .map(|&c| (0..n_actions).map(|a| if a == c { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { table }
    }

    pub fn prob(&self, obs: usize, action: usize) -> f64 {
        self.table[obs][action]
    }

    pub fn n_actions(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    pub fn sample<R: Rng + ?Sized>(&self, obs: usize, rng: &mut R) -> usize {
        sample_index(&self.table[obs], rng)
    }
}

/// Draws an index from unnormalized-but-summing-to-one weights. Falls back
/// to the last positive entry when rounding leaves the draw unassigned.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// One policy per agent. Index `k` drives POSG agent `k` and AEC agent `k + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyProfile {
    pub label: String,
    pub policies: Vec<Policy>,
}

impl PolicyProfile {
    pub fn uniform(actions: &[usize], observations: &[usize]) -> Self {
        Self {
            label: "uniform".into(),
            policies: actions
                .iter()
                .zip(observations)
                .map(|(&a, &o)| Policy::uniform(o, a))
                .collect(),
        }
    }

    /// Checks table shapes and row sums against per-agent set sizes.
    pub fn check(&self, actions: &[usize], observations: &[usize]) -> Result<(), FormalError> {
        if self.policies.len() != actions.len() {
            return Err(FormalError::PolicyMismatch(format!(
                "{} policies for {} agents",
                self.policies.len(),
                actions.len()
            )));
        }
        for (k, p) in self.policies.iter().enumerate() {
            if p.table.len() != observations[k] {
                return Err(FormalError::PolicyMismatch(format!(
                    "policy {k} has {} rows, agent has {} observations",
                    p.table.len(),
                    observations[k]
                )));
            }
            for (o, row) in p.table.iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if row.len() != actions[k]
                    || row.iter().any(|&x| !(x >= 0.0))
                    || (sum - 1.0).abs() > 1e-9
                {
                    return Err(FormalError::PolicyMismatch(format!(
                        "policy {k} row {o} is not a distribution over {} actions",
                        actions[k]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The profiles a conversion is checked against: every deterministic profile
/// if `∏ |A_i|^|Ω_i| ≤ 16`, otherwise eight seeded stochastic profiles.
pub fn battery(actions: &[usize], observations: &[usize], seed: u64) -> Vec<PolicyProfile> {
    let mut count: u128 = 1;
    for (&a, &o) in actions.iter().zip(observations) {
        count = count.saturating_mul((a as u128).saturating_pow(o as u32));
    }
    if count <= DETERMINISTIC_BATTERY_LIMIT {
        return (0..count as usize).map(|idx| deterministic_profile(actions, observations, idx)).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..STOCHASTIC_BATTERY_SIZE)
        .map(|b| PolicyProfile {
            label: format!("stochastic_{b}"),
            policies: actions
                .iter()
                .zip(observations)
                .map(|(&a, &o)| Policy {
                    table: (0..o)
                        .map(|_| {
                            let w: Vec<f64> = (0..a).map(|_| rng.gen_range(0.05..1.0)).collect();
                            let total: f64 = w.iter().sum();
                            w.into_iter().map(|x| x / total).collect()
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect()
}

/// Profile number `idx` in mixed radix over every agent's choice per observation.
fn deterministic_profile(actions: &[usize], observations: &[usize], mut idx: usize) -> PolicyProfile {
    let label = format!("deterministic_{idx}");
    let policies = actions
        .iter()
        .zip(observations)
        .map(|(&a, &o)| {
            let choices: Vec<usize> = (0..o)
                .map(|_| {
                    let c = idx % a;
                    idx /= a;
                    c
                })
                .collect();
            Policy::deterministic(&choices, a)
        })
        .collect();
    PolicyProfile { label, policies }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_games_get_every_deterministic_profile() {
        let b = battery(&[2, 2], &[1, 2], 0);
        assert_eq!(b.len(), 8);
        let distinct: std::collections::BTreeSet<String> =
            b.iter().map(|p| format!("{:?}", p.policies)).collect();
        assert_eq!(distinct.len(), 8);
        for p in &b {
            p.check(&[2, 2], &[1, 2]).unwrap();
        }
    }

    #[test]
    fn large_games_get_seeded_stochastic_profiles() {
        let b = battery(&[2, 2, 2], &[2, 2, 2], 5);
        assert_eq!(b.len(), STOCHASTIC_BATTERY_SIZE);
        assert_eq!(b, battery(&[2, 2, 2], &[2, 2, 2], 5));
        for p in &b {
            p.check(&[2, 2, 2], &[2, 2, 2]).unwrap();
        }
    }

    #[test]
    fn mismatched_profile_is_rejected() {
        let p = PolicyProfile::uniform(&[2], &[3]);
        assert!(p.check(&[2, 2], &[3, 3]).is_err());
        assert!(p.check(&[3], &[3]).is_err());
    }
}
