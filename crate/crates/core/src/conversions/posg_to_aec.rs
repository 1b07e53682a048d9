use crate::formal::{
    compile_posg, decode_joint, AecObservation, AecReward, AecSpec, AgentTransition, Derivation,
    EnvTransition, NextAgent, PosgSpec, QueuedState,
};

use super::ConversionError;

/// Composite state `(s, ā)` is indexed `s * |A| + encode(ā)`. Agent 1 moves first
/// with every slot holding action 0; the order is `1, …, N, env` repeating, so
/// POSG step `t` corresponds to AEC step `t(N+1)`. Agent `i` observes
/// `O_i(ā_i, s)`: before it acts in a cycle, slot `i` still holds its previous action.
pub fn posg_to_aec(posg: &PosgSpec) -> Result<AecSpec, ConversionError> {
    let c = compile_posg(posg)?;
    let n = c.n_agents;
    let nj = c.n_joint;
    let composite = |s: usize, j: usize| s * nj + j;
    let mut aec = AecSpec {
        num_states: c.n_states * nj,
        initial_state: composite(c.initial, 0),
        num_agents: n,
        first_actor: 1,
        actions: c.actions.clone(),
        observations: c.observations.clone(),
        agent_transitions: Vec::new(),
        env_transitions: Vec::new(),
        reward_sets: None,
        rewards: Vec::new(),
        observation_fn: Vec::new(),
        next_agent: Vec::new(),
        derivation: None,
    };
    let mut states = Vec::with_capacity(aec.num_states);
    for s in 0..c.n_states {
        for j in 0..nj {
            let k = composite(s, j);
            let queued = decode_joint(&c.actions, j);
            for i in 0..n {
                for a in 0..c.actions[i] {
                    let mut q = queued.clone();
                    q[i] = a;
                    aec.agent_transitions.push(AgentTransition {
                        agent: i + 1,
                        state: k,
                        action: a,
                        next: composite(s, crate::formal::encode_joint(&c.actions, &q)),
                    });
                }
                for &(obs, p) in &c.obs_fn[i][queued[i]][s] {
                    aec.observation_fn.push(AecObservation { agent: i + 1, state: k, obs, p });
                }
            }
            for b in c.row(s, j) {
                let next = composite(b.next, j);
                aec.env_transitions.push(EnvTransition { state: k, next, p: b.p });
                for (i, &value) in b.rewards.iter().enumerate() {
                    if value != 0.0 {
                        aec.rewards.push(AecReward {
                            agent: i + 1,
                            state: k,
                            actor: 0,
                            action: 0,
                            next,
                            value,
                            p: 1.0,
                        });
                    }
                }
            }
            for actor in 0..=n {
                let n_actions = if actor == 0 { 1 } else { c.actions[actor - 1] };
                for action in 0..n_actions {
                    aec.next_agent.push(NextAgent { state: k, actor, action, next: (actor + 1) % (n + 1), p: 1.0 });
                }
            }
            states.push(QueuedState { state: s, queued });
        }
    }
    aec.derivation = Some(Derivation::PosgToAec { states });
    Ok(aec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::{random_posg, validate_aec, GenParams, PosgObservation, PosgTransition};

    #[test]
    fn state_count_is_product_of_sets() {
        let mut spec = random_posg(&GenParams::default(), 0);
        // Force |S| = 2, N = 2, |A_i| = 2 with uniform dynamics.
        spec.num_states = 2;
        spec.initial_state = 0;
        spec.num_agents = 2;
        spec.actions = vec![2, 2];
        spec.observations = vec![1, 1];
        spec.rewards.clear();
        spec.transitions = (0..2)
            .flat_map(|s| (0..4).map(move |j| PosgTransition { state: s, joint: decode_joint(&[2, 2], j), next: s, p: 1.0 }))
            .collect();
        spec.observation_fn = (0..2)
            .flat_map(|i| (0..2).flat_map(move |a| (0..2).map(move |s| PosgObservation { agent: i, action: a, state: s, obs: 0, p: 1.0 })))
            .collect();
        let aec = posg_to_aec(&spec).unwrap();
        assert_eq!(aec.num_states, 8);
        assert!(validate_aec(&aec).is_empty());
    }

    #[test]
    fn trivial_posg_alternates_agent_and_env() {
        let spec = PosgSpec {
            num_states: 1,
            initial_state: 0,
            num_agents: 1,
            actions: vec![1],
            observations: vec![1],
            transitions: vec![PosgTransition { state: 0, joint: vec![0], next: 0, p: 1.0 }],
            rewards: vec![],
            observation_fn: vec![PosgObservation { agent: 0, action: 0, state: 0, obs: 0, p: 1.0 }],
            derivation: None,
        };
        let aec = posg_to_aec(&spec).unwrap();
        assert_eq!(aec.num_states, 1);
        assert_eq!(aec.first_actor, 1);
        let mut nu: Vec<(usize, usize)> = aec.next_agent.iter().map(|e| (e.actor, e.next)).collect();
        nu.sort();
        assert_eq!(nu, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn generated_conversions_validate() {
        for seed in 0..30 {
            let aec = posg_to_aec(&random_posg(&GenParams::default(), seed)).unwrap();
            assert!(validate_aec(&aec).is_empty(), "seed {seed}");
        }
    }
}
