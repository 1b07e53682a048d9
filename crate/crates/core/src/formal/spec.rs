//! Serializable tabular game specifications.
//!
//! Tables are sparse: only entries with nonzero probability are listed.
//! POSG agents are indexed `0..N`. AEC agents are indexed `1..=N`, with the
//! environment actor at index `0` and its single null action at index `0`.

use serde::{Deserialize, Serialize};

/// Finite partially observable stochastic game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosgSpec {
    pub num_states: usize,
    pub initial_state: usize,
    pub num_agents: usize,
    /// `|A_i|` per agent.
    pub actions: Vec<usize>,
    /// `|Ω_i|` per agent.
    pub observations: Vec<usize>,
    pub transitions: Vec<PosgTransition>,
    /// Missing entries are reward 0.
    #[serde(default)]
    pub rewards: Vec<PosgReward>,
    pub observation_fn: Vec<PosgObservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<Derivation>,
}

/// `P(state, joint, next) = p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosgTransition {
    pub state: usize,
    pub joint: Vec<usize>,
    pub next: usize,
    pub p: f64,
}

/// `R_agent(state, joint, next) = value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosgReward {
    pub agent: usize,
    pub state: usize,
    pub joint: Vec<usize>,
    pub next: usize,
    pub value: f64,
}

/// `O_agent(action, state, obs) = p`, where `action` is the agent's previous action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosgObservation {
    pub agent: usize,
    pub action: usize,
    pub state: usize,
    pub obs: usize,
    pub p: f64,
}

/// Finite agent environment cycle game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AecSpec {
    pub num_states: usize,
    pub initial_state: usize,
    pub num_agents: usize,
    /// Actor that takes the first step. The environment (0) unless stated.
    #[serde(default)]
    pub first_actor: usize,
    /// `|A_i|` for agents `1..=N`, in order.
    pub actions: Vec<usize>,
    /// `|Ω_i|` for agents `1..=N`, in order.
    pub observations: Vec<usize>,
    /// Deterministic `T_i(state, action) = next`; must be total.
    pub agent_transitions: Vec<AgentTransition>,
    /// Environment transition `P(state, next) = p`.
    pub env_transitions: Vec<EnvTransition>,
    /// Declared reward sets `ℛ_i` for agents `1..=N`; inferred when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_sets: Option<Vec<Vec<f64>>>,
    /// `R_agent(state, actor, action, next, value) = p`. A `(state, actor, action, next)`
    /// row with no entries gives reward 0 with probability 1.
    #[serde(default)]
    pub rewards: Vec<AecReward>,
    pub observation_fn: Vec<AecObservation>,
    /// `ν(state, actor, action, next) = p`.
    pub next_agent: Vec<NextAgent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<Derivation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTransition {
    pub agent: usize,
    pub state: usize,
    pub action: usize,
    pub next: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvTransition {
    pub state: usize,
    pub next: usize,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AecReward {
    pub agent: usize,
    pub state: usize,
    pub actor: usize,
    pub action: usize,
    pub next: usize,
    pub value: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AecObservation {
    pub agent: usize,
    pub state: usize,
    pub obs: usize,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextAgent {
    pub state: usize,
    pub actor: usize,
    pub action: usize,
    pub next: usize,
    pub p: f64,
}

/// How a converted spec's states map back onto the source game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum Derivation {
    /// AEC state `k` is `(source state, queued actions)`.
    PosgToAec { states: Vec<QueuedState> },
    /// POSG state `k` is `(source state, actor to move)`.
    AecToPosgDeterministic { states: Vec<TurnState> },
    /// POSG state `k` is `(source state, actor to move, last reward vector)`.
    AecToPosgGeneral { states: Vec<RewardTurnState>, note: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueuedState {
    pub state: usize,
    pub queued: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnState {
    pub state: usize,
    pub actor: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTurnState {
    pub state: usize,
    pub actor: usize,
    pub rewards: Vec<f64>,
}

/// Either kind of spec, as read from a spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AnySpec {
    Posg(PosgSpec),
    Aec(AecSpec),
}

/// Mixed-radix index of a joint action; agent 0 is the most significant digit.
pub fn encode_joint(sizes: &[usize], joint: &[usize]) -> usize {
    sizes.iter().zip(joint).fold(0, |acc, (&n, &a)| acc * n + a)
}

pub fn decode_joint(sizes: &[usize], mut index: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &n) in out.iter_mut().zip(sizes).rev() {
        *slot = index % n;
        index /= n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_encoding_round_trips() {
        let sizes = [2, 3, 2];
        for j in 0..12 {
            assert_eq!(encode_joint(&sizes, &decode_joint(&sizes, j)), j);
        }
        assert_eq!(decode_joint(&sizes, 1), vec![0, 0, 1]);
        assert_eq!(encode_joint(&sizes, &[1, 0, 0]), 6);
    }

    #[test]
    fn any_spec_is_tagged() {
        let json = r#"{"model":"aec","num_states":1,"initial_state":0,"num_agents":1,
            "actions":[1],"observations":[1],
            "agent_transitions":[{"agent":1,"state":0,"action":0,"next":0}],
            "env_transitions":[{"state":0,"next":0,"p":1.0}],
            "observation_fn":[{"agent":1,"state":0,"obs":0,"p":1.0}],
            "next_agent":[]}"#;
        let spec: AnySpec = serde_json::from_str(json).unwrap();
        match spec {
            AnySpec::Aec(a) => {
                assert_eq!(a.first_actor, 0);
                assert!(a.rewards.is_empty());
            }
            AnySpec::Posg(_) => panic!("wrong model"),
        }
    }
}
