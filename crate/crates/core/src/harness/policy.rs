//! Action sources for rollouts: uniform random, greedy pursuit and fixed scripts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::aec::{legal_actions, Action, AecEnv, AgentId};
use crate::envs::grid::{Dir, Pos};
use crate::envs::pursuit::STAY;

/// Salt separating the policy stream from the environment stream.
pub const POLICY_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Random,
    GreedyPursuit,
    Scripted(Script),
}

/// Per-agent action sequences, consumed one action per turn.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub actions: BTreeMap<AgentId, Vec<Action>>,
}

impl Script {
    /// Accepts `{"agent": [..], ..}`, or an object whose `"script"` entry is either
    /// such a map or a list indexed like the environment's non-env agents.
    pub fn from_json(value: &Value, env: &dyn AecEnv) -> Result<Self, HarnessError> {
        let bad = |m: String| HarnessError::PolicySpaceMismatch(m);
        let body = value.get("script").unwrap_or(value);
        let actions = match body {
            Value::Array(rows) => {
                let agents: Vec<AgentId> = env
                    .possible_agents()
                    .unwrap_or_else(|| env.agents().to_vec())
                    .into_iter()
                    .filter(|a| !a.is_env())
                    .collect();
                if rows.len() > agents.len() {
                    return Err(bad(format!("script has {} rows for {} agents", rows.len(), agents.len())));
                }
                let rows: Vec<Vec<Action>> = serde_json::from_value(body.clone()).map_err(|e| bad(e.to_string()))?;
                agents.into_iter().zip(rows).collect()
            }
            _ => serde_json::from_value(body.clone()).map_err(|e| bad(e.to_string()))?,
        };
        Ok(Self { actions })
    }
}

pub trait Driver: Send {
    fn act(&mut self, env: &dyn AecEnv, agent: &AgentId) -> Result<Action, HarnessError>;
}

/// Builds the driver for `spec` after checking it fits `env`, which must be reset.
pub fn build_driver(spec: &PolicySpec, env: &dyn AecEnv, seed: u64) -> Result<Box<dyn Driver>, HarnessError> {
    Ok(match spec {
        PolicySpec::Random => Box::new(RandomDriver { rng: ChaCha8Rng::seed_from_u64(seed ^ POLICY_SALT) }),
        PolicySpec::GreedyPursuit => {
            if env.name() != "pursuit" {
                return Err(HarnessError::PolicySpaceMismatch(format!(
                    "greedy_pursuit needs a pursuit environment, not {}",
                    env.name()
                )));
            }
            Box::new(GreedyPursuit)
        }
        PolicySpec::Scripted(script) => {
            for (agent, actions) in &script.actions {
                let space = env
                    .action_space(agent)
                    .map_err(|_| HarnessError::PolicySpaceMismatch(format!("no agent {agent}")))?;
                if let Some(&a) = actions.iter().find(|&&a| !space.contains_action(a)) {
                    return Err(HarnessError::PolicySpaceMismatch(format!("action {a} outside the space of {agent}")));
                }
            }
            Box::new(Scripted { script: script.clone(), cursor: BTreeMap::new() })
        }
    })
}

struct RandomDriver {
    rng: ChaCha8Rng,
}

impl Driver for RandomDriver {
    fn act(&mut self, env: &dyn AecEnv, agent: &AgentId) -> Result<Action, HarnessError> {
        let mut legal = legal_actions(env, agent)?;
        if legal.is_empty() {
            let n = env.action_space(agent)?.n().ok_or_else(|| {
                HarnessError::PolicySpaceMismatch(format!("{agent} has a non-discrete action space"))
            })?;
            legal = (0..n).collect();
        }
        Ok(*legal.choose(&mut self.rng).expect("nonempty"))
    }
}

struct Scripted {
    script: Script,
    cursor: BTreeMap<AgentId, usize>,
}

impl Driver for Scripted {
    fn act(&mut self, _env: &dyn AecEnv, agent: &AgentId) -> Result<Action, HarnessError> {
        let k = self.cursor.entry(agent.clone()).or_insert(0);
        let a = self
            .script
            .actions
            .get(agent)
            .and_then(|seq| seq.get(*k))
            .copied()
            .ok_or_else(|| HarnessError::ScriptExhausted(agent.clone()))?;
        *k += 1;
        Ok(a)
    }
}

/// Moves toward the nearest remaining evader along a Manhattan shortest path,
/// preferring North, East, South, West; stays once on the evader's cell or when
/// none remain. Reads positions from the `"position"` info and the state tensor.
struct GreedyPursuit;

impl GreedyPursuit {
    fn evaders(env: &dyn AecEnv) -> Vec<Pos> {
        let Some(state) = env.state().tensor().cloned() else { return Vec::new() };
        let (w, h) = (state.shape()[0], state.shape()[1]);
        let mut out = Vec::new();
        for x in 0..w {
            for y in 0..h {
                if state.at(&[x, y, 2]) > 0.0 {
                    out.push(Pos::new(x as i64, y as i64));
                }
            }
        }
        out
    }
}

impl Driver for GreedyPursuit {
    fn act(&mut self, env: &dyn AecEnv, agent: &AgentId) -> Result<Action, HarnessError> {
        let info = env.status()?.infos.get(agent).cloned().unwrap_or_default();
        let me: Pos = info
            .get("position")
            .and_then(|p| serde_json::from_value(p.clone()).ok())
            .ok_or_else(|| HarnessError::PolicySpaceMismatch(format!("{agent} reports no position")))?;
        let Some(target) = Self::evaders(env).into_iter().min_by_key(|e| (me.manhattan(*e), *e)) else {
            return Ok(STAY);
        };
        let d = me.manhattan(target);
        Ok(Dir::ALL.into_iter().find(|&dir| me.step(dir).manhattan(target) < d).map_or(STAY, |dir| dir as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{pursuit_new, tictactoe_new, PursuitConfig, RewardMode};

    #[test]
    fn greedy_prefers_north_then_east() {
        let mut env = pursuit_new(PursuitConfig::small(RewardMode::Unpruned)).unwrap();
        env.reset(0);
        env.game_mut().set_positions(vec![Pos::new(2, 2), Pos::new(7, 7)], vec![Pos::new(4, 5)]).unwrap();
        env.refresh();
        let mut g = build_driver(&PolicySpec::GreedyPursuit, &env, 0).unwrap();
        assert_eq!(g.act(&env, &AgentId::indexed("pursuer", 0)).unwrap(), Dir::North as usize);
        env.game_mut().set_positions(vec![Pos::new(2, 5), Pos::new(7, 7)], vec![Pos::new(4, 5)]).unwrap();
        env.refresh();
        assert_eq!(g.act(&env, &AgentId::indexed("pursuer", 0)).unwrap(), Dir::East as usize);
    }

    #[test]
    fn greedy_rejects_other_environments() {
        let mut env = tictactoe_new();
        env.reset(0);
        assert!(matches!(
            build_driver(&PolicySpec::GreedyPursuit, &env, 0),
            Err(HarnessError::PolicySpaceMismatch(_))
        ));
    }

    #[test]
    fn scripts_parse_both_layouts_and_check_spaces() {
        let mut env = tictactoe_new();
        env.reset(0);
        let list = Script::from_json(&serde_json::json!({"script": [[0, 1], [3]]}), &env).unwrap();
        let map = Script::from_json(&serde_json::json!({"player_0": [0, 1], "player_1": [3]}), &env).unwrap();
        assert_eq!(list, map);
        let bad = Script::from_json(&serde_json::json!({"player_0": [9]}), &env).unwrap();
        assert!(build_driver(&PolicySpec::Scripted(bad), &env, 0).is_err());
    }
}
