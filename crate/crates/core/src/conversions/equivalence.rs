//! Matched-policy comparison of a game and its conversion by exact enumeration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::exec::{map_slice, Execution};
use crate::formal::{
    compile_aec, compile_posg, enumerate_aec, enumerate_posg, total_variation, AecSeries,
    AecSpec, CompiledAec, CompiledPosg, Derivation, PolicyProfile, PosgSeries, PosgSpec,
    DEFAULT_BRANCH_CAP,
};

use super::ConversionError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// POSG step `t` against AEC step `t(N+1)`.
    PosgToAec,
    /// AEC step `t` against POSG step `t`.
    AecToPosgDeterministic,
    AecToPosgGeneral,
}

/// Per-profile discrepancies, indexed by source step `t = 0..=horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub label: String,
    /// TV between distributions over the underlying source state.
    pub state_tv: Vec<f64>,
    /// TV over the richest matched key: `(s, actor)` or `(s, actor, r̄)`, or the
    /// underlying state for the POSG → AEC direction.
    pub joint_tv: Vec<f64>,
    /// Max over agents of the expected cumulative reward difference.
    pub reward_diff: Vec<f64>,
    /// Max conditional observation-marginal difference before each agent acts
    /// (POSG → AEC only; `t < horizon`).
    pub obs_diff: Vec<f64>,
    pub first_divergent_t: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub direction: Direction,
    pub notes: Vec<String>,
    pub horizon: usize,
    pub tol: f64,
    pub profiles: Vec<ProfileResult>,
    pub max_tv: f64,
    pub max_reward_diff: f64,
    pub max_obs_diff: f64,
    pub first_divergent_t: Option<usize>,
}

impl EquivalenceReport {
    pub fn ok(&self) -> bool {
        self.first_divergent_t.is_none()
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

enum Correspondence {
    Queued(Vec<usize>),
    Turn(Vec<(usize, usize)>),
    RewardTurn(Vec<(usize, usize, Vec<u64>)>),
}

fn correspondence(posg: &PosgSpec, aec: &AecSpec) -> Result<(Direction, Correspondence), ConversionError> {
    let missing = |why: &str| Err(ConversionError::MissingCorrespondence(why.to_string()));
    match (&aec.derivation, &posg.derivation) {
        (Some(Derivation::PosgToAec { states }), _) => {
            if states.len() != aec.num_states {
                return missing("AEC derivation does not cover every state");
            }
            if states.iter().any(|q| q.state >= posg.num_states) {
                return missing("AEC derivation refers to a state outside the POSG");
            }
            Ok((Direction::PosgToAec, Correspondence::Queued(states.iter().map(|q| q.state).collect())))
        }
        (_, Some(Derivation::AecToPosgDeterministic { states })) => {
            if states.len() != posg.num_states || states.iter().any(|t| t.state >= aec.num_states) {
                return missing("POSG derivation does not match the AEC state set");
            }
            Ok((
                Direction::AecToPosgDeterministic,
                Correspondence::Turn(states.iter().map(|t| (t.state, t.actor)).collect()),
            ))
        }
        (_, Some(Derivation::AecToPosgGeneral { states, .. })) => {
            if states.len() != posg.num_states || states.iter().any(|t| t.state >= aec.num_states) {
                return missing("POSG derivation does not match the AEC state set");
            }
            Ok((
                Direction::AecToPosgGeneral,
                Correspondence::RewardTurn(
                    states
                        .iter()
                        .map(|t| (t.state, t.actor, t.rewards.iter().map(|r| (r + 0.0).to_bits()).collect()))
                        .collect(),
                ),
            ))
        }
        _ => missing("neither spec carries a derivation"),
    }
}

/// Enumerates both games under every profile of the battery and compares them
/// at matched step indices. The direction is read from whichever spec carries
/// a derivation.
pub fn check_equivalence(
    posg: &PosgSpec,
    aec: &AecSpec,
    battery: &[PolicyProfile],
    horizon: usize,
    tol: f64,
    exec: Execution,
) -> Result<EquivalenceReport, ConversionError> {
    let (direction, corr) = correspondence(posg, aec)?;
    let cp = compile_posg(posg)?;
    let ca = compile_aec(aec)?;
    let mut notes = Vec::new();
    if let Some(Derivation::AecToPosgGeneral { note, .. }) = &posg.derivation {
        notes.push(note.clone());
    }
    let results = map_slice(battery, exec, |profile| -> Result<ProfileResult, ConversionError> {
        let mut r = match &corr {
            Correspondence::Queued(map) => compare_posg_source(&cp, &ca, map, profile, horizon)?,
            Correspondence::Turn(map) => {
                let keyed: Vec<(usize, usize, Vec<u64>)> = map.iter().map(|&(s, i)| (s, i, Vec::new())).collect();
                compare_aec_source(&cp, &ca, &keyed, false, profile, horizon)?
            }
            Correspondence::RewardTurn(map) => compare_aec_source(&cp, &ca, map, true, profile, horizon)?,
        };
        r.first_divergent_t = (0..=horizon).find(|&t| {
            r.state_tv[t] > tol
                || r.joint_tv[t] > tol
                || r.reward_diff[t] > tol
                || r.obs_diff.get(t).is_some_and(|&d| d > tol)
        });
        Ok(r)
    });
    let profiles = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(EquivalenceReport {
        direction,
        notes,
        horizon,
        tol,
        max_tv: profiles.iter().map(|p| max_of(&p.state_tv).max(max_of(&p.joint_tv))).fold(0.0, f64::max),
        max_reward_diff: profiles.iter().map(|p| max_of(&p.reward_diff)).fold(0.0, f64::max),
        max_obs_diff: profiles.iter().map(|p| max_of(&p.obs_diff)).fold(0.0, f64::max),
        first_divergent_t: profiles.iter().filter_map(|p| p.first_divergent_t).min(),
        profiles,
    })
}

fn compare_posg_source(
    cp: &CompiledPosg,
    ca: &CompiledAec,
    map: &[usize],
    profile: &PolicyProfile,
    horizon: usize,
) -> Result<ProfileResult, ConversionError> {
    let n = cp.n_agents;
    let ps: PosgSeries = enumerate_posg(cp, profile, horizon, DEFAULT_BRANCH_CAP)?;
    let asr: AecSeries = enumerate_aec(ca, profile, horizon * (n + 1), false, DEFAULT_BRANCH_CAP)?;
    let mut state_tv = Vec::new();
    let mut reward_diff = Vec::new();
    let mut obs_diff = Vec::new();
    for t in 0..=horizon {
        let step = t * (n + 1);
        let mut a_marg = BTreeMap::new();
        for (k, &p) in &asr.dists[step] {
            *a_marg.entry(map[k.state]).or_insert(0.0) += p;
        }
        state_tv.push(total_variation(&ps.state_marginal(t), &a_marg));
        reward_diff.push(max_abs_diff(&ps.returns[t], &asr.returns[step]));
        if t < horizon {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                // POSG: P(ω_i | s) at step t. AEC: P(ω_i | s) just before agent i+1 acts.
                let mut posg_obs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for (k, &q) in &ps.dists[t] {
                    let prev = cp.decode(k.prev)[i];
                    let row = posg_obs.entry(k.state).or_insert_with(|| vec![0.0; cp.observations[i] + 1]);
                    row[0] += q;
                    for &(o, po) in &cp.obs_fn[i][prev][k.state] {
                        row[o + 1] += q * po;
                    }
                }
                let mut aec_obs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for (k, &q) in &asr.dists[step + i] {
                    if k.actor != i + 1 {
                        continue;
                    }
                    let row = aec_obs.entry(map[k.state]).or_insert_with(|| vec![0.0; cp.observations[i] + 1]);
                    row[0] += q;
                    for &(o, po) in &ca.obs_fn[i + 1][k.state] {
                        row[o + 1] += q * po;
                    }
                }
                for (s, prow) in &posg_obs {
                    let Some(arow) = aec_obs.get(s) else { continue };
                    if prow[0] <= 1e-15 || arow[0] <= 1e-15 {
                        continue;
                    }
                    for o in 1..prow.len() {
                        worst = worst.max((prow[o] / prow[0] - arow[o] / arow[0]).abs());
                    }
                }
            }
            obs_diff.push(worst);
        }
    }
    Ok(ProfileResult {
        label: profile.label.clone(),
        joint_tv: state_tv.clone(),
        state_tv,
        reward_diff,
        obs_diff,
        first_divergent_t: None,
    })
}

fn compare_aec_source(
    cp: &CompiledPosg,
    ca: &CompiledAec,
    map: &[(usize, usize, Vec<u64>)],
    track_rewards: bool,
    profile: &PolicyProfile,
    horizon: usize,
) -> Result<ProfileResult, ConversionError> {
    let ps = enumerate_posg(cp, profile, horizon, DEFAULT_BRANCH_CAP)?;
    let asr = enumerate_aec(ca, profile, horizon, track_rewards, DEFAULT_BRANCH_CAP)?;
    let mut state_tv = Vec::new();
    let mut joint_tv = Vec::new();
    let mut reward_diff = Vec::new();
    for t in 0..=horizon {
        // The initial reward component is a placeholder on both sides.
        let with_rewards = track_rewards && t > 0;
        let mut p_state = BTreeMap::new();
        let mut p_joint: BTreeMap<(usize, usize, Vec<u64>), f64> = BTreeMap::new();
        for (k, &q) in &ps.dists[t] {
            let (s, i, r) = &map[k.state];
            *p_state.entry(*s).or_insert(0.0) += q;
            let r = if with_rewards { r.clone() } else { Vec::new() };
            *p_joint.entry((*s, *i, r)).or_insert(0.0) += q;
        }
        let mut a_joint: BTreeMap<(usize, usize, Vec<u64>), f64> = BTreeMap::new();
        for (k, &q) in &asr.dists[t] {
            let r = if with_rewards {
                k.reward_vector().iter().map(|v| (v + 0.0).to_bits()).collect()
            } else {
                Vec::new()
            };
            *a_joint.entry((k.state, k.actor, r)).or_insert(0.0) += q;
        }
        state_tv.push(total_variation(&p_state, &asr.state_marginal(t)));
        joint_tv.push(total_variation(&p_joint, &a_joint));
        reward_diff.push(max_abs_diff(&ps.returns[t], &asr.returns[t]));
    }
    Ok(ProfileResult {
        label: profile.label.clone(),
        state_tv,
        joint_tv,
        reward_diff,
        obs_diff: Vec::new(),
        first_divergent_t: None,
    })
}
