use std::collections::BTreeMap;

use crate::formal::{
    compile_aec, decode_joint, AecSpec, CompiledAec, Derivation, PosgObservation, PosgReward,
    PosgSpec, PosgTransition, RewardTurnState, TurnState,
};

use super::ConversionError;

/// Default cap on `∏ |ℛ_i|` for the general construction.
pub const DEFAULT_REWARD_PRODUCT_CAP: u128 = 4096;

/// Recorded on general conversions and echoed by equivalence reports.
pub const GENERAL_OBSERVATION_NOTE: &str =
    "observation function reused from the deterministic construction: O'_i(a, (s, j, r)) = O_i(s)";

/// POSG agent `k` is AEC agent `k + 1`; only the acting agent's component of
/// the joint action matters, and the environment turn ignores all of them.
fn skeleton(c: &CompiledAec, num_states: usize, initial_state: usize) -> PosgSpec {
    PosgSpec {
        num_states,
        initial_state,
        num_agents: c.n_agents,
        actions: c.actions[1..].to_vec(),
        observations: c.observations[1..].to_vec(),
        transitions: Vec::new(),
        rewards: Vec::new(),
        observation_fn: Vec::new(),
        derivation: None,
    }
}

fn acting_component(joint: &[usize], actor: usize) -> usize {
    if actor == 0 {
        0
    } else {
        joint[actor - 1]
    }
}

fn push_observations(c: &CompiledAec, posg: &mut PosgSpec, state: usize, s: usize) {
    for k in 0..c.n_agents {
        for action in 0..c.actions[k + 1] {
            for &(obs, p) in &c.obs_fn[k + 1][s] {
                posg.observation_fn.push(PosgObservation { agent: k, action, state, obs, p });
            }
        }
    }
}

/// States `(s, i)` indexed `s * (N+1) + i`;
/// `P'((s,i), ā, (s',i')) = ν(s,i,a_i,i') · Pr(s' | s,i,a_i)` and
/// `R'_k((s,i), ā, (s',i')) = R*_{k+1}(s, i, a_i, s')`.
pub fn aec_to_posg_det(aec: &AecSpec) -> Result<PosgSpec, ConversionError> {
    let c = compile_aec(aec)?;
    if !c.has_deterministic_rewards() {
        return Err(ConversionError::NondeterministicRewards);
    }
    let n = c.n_agents;
    let turn = |s: usize, i: usize| s * (n + 1) + i;
    let mut posg = skeleton(&c, c.n_states * (n + 1), turn(c.initial, c.first_actor));
    let sizes = c.actions[1..].to_vec();
    let n_joint: usize = sizes.iter().product();
    let mut states = Vec::new();
    for s in 0..c.n_states {
        for i in 0..=n {
            let from = turn(s, i);
            for j in 0..n_joint {
                let joint = decode_joint(&sizes, j);
                let a = acting_component(&joint, i);
                for (s2, ps) in c.successors(s, i, a) {
                    for &(i2, pn) in &c.nu[s][i][a] {
                        let next = turn(s2, i2);
                        posg.transitions.push(PosgTransition { state: from, joint: joint.clone(), next, p: ps * pn });
                        for k in 0..n {
                            let value = c.reward_dist(k + 1, s, i, a, s2)[0].0;
                            if value != 0.0 {
                                posg.rewards.push(PosgReward { agent: k, state: from, joint: joint.clone(), next, value });
                            }
                        }
                    }
                }
            }
            push_observations(&c, &mut posg, from, s);
            states.push(TurnState { state: s, actor: i });
        }
    }
    posg.derivation = Some(Derivation::AecToPosgDeterministic { states });
    Ok(posg)
}

/// States `(s, i, r̄)` with `r̄ ∈ ℛ_1 × … × ℛ_N`, indexed
/// `(s * (N+1) + i) * ∏|ℛ| + encode(r̄)`. The transition multiplies in
/// `∏_j R_j(s, i, a_i, s', r̄'_j)` and agent `k` is paid `r̄'_{k+1}` of the
/// successor. The initial reward vector uses 0 where the set contains it.
pub fn aec_to_posg_general(aec: &AecSpec, cap: u128) -> Result<PosgSpec, ConversionError> {
    let c = compile_aec(aec)?;
    let n = c.n_agents;
    let sets: Vec<Vec<f64>> = c.reward_sets[1..].to_vec();
    let size: u128 = sets.iter().map(|s| s.len() as u128).product();
    if size > cap {
        return Err(ConversionError::RewardSetTooLarge { size, cap });
    }
    let radix: Vec<usize> = sets.iter().map(Vec::len).collect();
    let n_r = size as usize;
    let index = |s: usize, i: usize, r: usize| (s * (n + 1) + i) * n_r + r;
    let position: Vec<BTreeMap<u64, usize>> = sets
        .iter()
        .map(|set| set.iter().enumerate().map(|(p, v)| ((v + 0.0).to_bits(), p)).collect())
        .collect();
    let initial_r: Vec<usize> = sets
        .iter()
        .map(|set| set.iter().position(|&v| v == 0.0).unwrap_or(0))
        .collect();
    let initial = index(c.initial, c.first_actor, crate::formal::encode_joint(&radix, &initial_r));
    let mut posg = skeleton(&c, c.n_states * (n + 1) * n_r, initial);
    let sizes = c.actions[1..].to_vec();
    let n_joint: usize = sizes.iter().product();
    let mut states = Vec::new();

    for s in 0..c.n_states {
        for i in 0..=n {
            // Successor rows depend on (s, i, a_i) only; r̄ of the source is irrelevant.
            let rows: Vec<Vec<(usize, f64, Vec<f64>)>> = (0..c.actions[i])
                .map(|a| {
                    let mut out = Vec::new();
                    for (s2, ps) in c.successors(s, i, a) {
                        for &(i2, pn) in &c.nu[s][i][a] {
                            for (r_idx, pr, values) in reward_outcomes(&c, &position, &radix, s, i, a, s2) {
                                out.push((index(s2, i2, r_idx), ps * pn * pr, values));
                            }
                        }
                    }
                    out
                })
                .collect();
            for r in 0..n_r {
                let from = index(s, i, r);
                for j in 0..n_joint {
                    let joint = decode_joint(&sizes, j);
                    let a = acting_component(&joint, i);
                    for (next, p, values) in &rows[a] {
                        posg.transitions.push(PosgTransition { state: from, joint: joint.clone(), next: *next, p: *p });
                        for (k, &value) in values.iter().enumerate() {
                            if value != 0.0 {
                                posg.rewards.push(PosgReward { agent: k, state: from, joint: joint.clone(), next: *next, value });
                            }
                        }
                    }
                }
                push_observations(&c, &mut posg, from, s);
                let rv = decode_joint(&radix, r);
                states.push(RewardTurnState {
                    state: s,
                    actor: i,
                    rewards: rv.iter().zip(&sets).map(|(&p, set)| set[p]).collect(),
                });
            }
        }
    }
    posg.derivation = Some(Derivation::AecToPosgGeneral { states, note: GENERAL_OBSERVATION_NOTE.to_string() });
    Ok(posg)
}

/// Joint reward outcomes as `(encoded index, probability, values)`.
fn reward_outcomes(
    c: &CompiledAec,
    position: &[BTreeMap<u64, usize>],
    radix: &[usize],
    s: usize,
    i: usize,
    a: usize,
    s2: usize,
) -> Vec<(usize, f64, Vec<f64>)> {
    let mut partial: Vec<(Vec<usize>, f64, Vec<f64>)> = vec![(Vec::new(), 1.0, Vec::new())];
    for k in 1..=c.n_agents {
        let dist = c.reward_dist(k, s, i, a, s2);
        partial = partial
            .into_iter()
            .flat_map(|(idx, p, vals)| {
                dist.iter().map(move |&(v, pv)| {
                    let mut idx = idx.clone();
                    let mut vals = vals.clone();
                    idx.push(position[k - 1][&(v + 0.0).to_bits()]);
                    vals.push(v);
                    (idx, p * pv, vals)
                })
            })
            .collect();
    }
    partial
        .into_iter()
        .map(|(idx, p, vals)| (crate::formal::encode_joint(radix, &idx), p, vals))
        .collect()
}
