//! Bundled sequential environments and the name-based registry.
//!
//! | name | agents | env agent | cycle-regular |
//! |---|---|---|---|
//! | `tictactoe` | `player_0`, `player_1` | no | no |
//! | `rps` | `player_0`, `player_1` | no | yes |
//! | `reverse_game` | `seat_0..` | no | no |
//! | `pursuit` | `pursuer_0..`, `env` | yes | yes |
//! | `cleanup` | `agent_0..`, `env` | yes | yes |
//! | `spec` | `agent_1..`, `env` | yes | no |

pub mod cleanup;
pub mod grid;
pub mod pursuit;
pub mod reverse;
pub mod rps;
pub mod tictactoe;

pub use cleanup::{cleanup_new, CleanupConfig, CleanupEnv, CleanupScenario, SteppingMode};
pub use grid::{Dir, Pos};
pub use pursuit::{pursuit_new, PursuitConfig, PursuitEnv, RewardMode};
pub use reverse::{reverse_game_new, ReverseEnv};
pub use rps::{rps_new, rps_with, RpsConfig, RpsEnv};
pub use tictactoe::{tictactoe_new, TicTacToeEnv};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aec::{AecEnv, EnvError};
use crate::conversions::posg_to_aec;
use crate::formal::{AnySpec, SpecGame};

/// Registry names, in documentation order.
pub const BUNDLED: [&str; 6] = ["tictactoe", "rps", "reverse_game", "pursuit", "cleanup", "spec"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReverseConfig {
    #[serde(default = "three")]
    pub n_agents: usize,
    #[serde(default = "ten")]
    pub max_cycles: usize,
}

fn three() -> usize {
    3
}
fn ten() -> usize {
    10
}

/// A tabular spec run as an environment. POSG specs are converted first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecEnvConfig {
    pub spec: AnySpec,
    #[serde(default)]
    pub horizon: Option<u64>,
}

fn parse<T: DeserializeOwned>(name: &str, config: &Value) -> Result<T, EnvError> {
    let config = if config.is_null() { Value::Object(Default::default()) } else { config.clone() };
    serde_json::from_value(config).map_err(|e| EnvError::InvalidConfig(format!("{name}: {e}")))
}

fn cleanup_config(config: &Value) -> Result<CleanupConfig, EnvError> {
    match config {
        Value::Null => Ok(CleanupScenario::fig5().config),
        Value::Object(m) if m.is_empty() => Ok(CleanupScenario::fig5().config),
        Value::Object(m) if m.contains_key("config") => {
            parse::<CleanupScenario>("cleanup", config).map(|s| s.config)
        }
        _ => parse("cleanup", config),
    }
}

/// Fills defaults so that equal configurations serialize identically.
pub fn normalize_config(name: &str, config: &Value) -> Result<Value, EnvError> {
    let to_value = |v: Result<Value, serde_json::Error>| {
        v.map_err(|e| EnvError::InvalidConfig(format!("{name}: {e}")))
    };
    match name {
        "tictactoe" => match config {
            Value::Null => Ok(Value::Object(Default::default())),
            Value::Object(m) if m.is_empty() => Ok(config.clone()),
            _ => Err(EnvError::InvalidConfig("tictactoe takes no options".into())),
        },
        "rps" => to_value(serde_json::to_value(parse::<RpsConfig>(name, config)?)),
        "reverse_game" => to_value(serde_json::to_value(parse::<ReverseConfig>(name, config)?)),
        "pursuit" => to_value(serde_json::to_value(parse::<PursuitConfig>(name, config)?)),
        "cleanup" => to_value(serde_json::to_value(cleanup_config(config)?)),
        "spec" => to_value(serde_json::to_value(parse::<SpecEnvConfig>(name, config)?)),
        other => Err(EnvError::UnknownEnvironment(other.to_string())),
    }
}

/// Builds a bundled environment by name. `Value::Null` selects the defaults.
pub fn make(name: &str, config: &Value) -> Result<Box<dyn AecEnv>, EnvError> {
    let env: Box<dyn AecEnv> = match name {
        "tictactoe" => {
            normalize_config(name, config)?;
            Box::new(tictactoe_new())
        }
        "rps" => Box::new(rps_with(parse(name, config)?)?),
        "reverse_game" => {
            let c: ReverseConfig = parse(name, config)?;
            Box::new(reverse_game_new(c.n_agents, c.max_cycles)?)
        }
        "pursuit" => Box::new(pursuit_new(parse(name, config)?)?),
        "cleanup" => Box::new(cleanup_new(cleanup_config(config)?)?),
        "spec" => {
            let c: SpecEnvConfig = parse(name, config)?;
            let aec = match c.spec {
                AnySpec::Aec(a) => a,
                AnySpec::Posg(p) => {
                    posg_to_aec(&p).map_err(|e| EnvError::InvalidConfig(format!("spec: {e}")))?
                }
            };
            let env = SpecGame::env(&aec, c.horizon)
                .map_err(|e| EnvError::InvalidConfig(format!("spec: {e}")))?;
            Box::new(env)
        }
        other => return Err(EnvError::UnknownEnvironment(other.to_string())),
    };
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn every_bundled_name_except_spec_builds_with_defaults() {
        for name in BUNDLED.iter().filter(|n| **n != "spec") {
            let mut env = make(name, &Value::Null).unwrap();
            env.reset(1);
            assert!(!env.agents().is_empty(), "{name}");
        }
    }

    #[test]
    fn unknown_names_and_fields_are_rejected() {
        assert!(matches!(make("chess", &Value::Null), Err(EnvError::UnknownEnvironment(_))));
        assert!(matches!(
            make("rps", &json!({"rounds": 3})),
            Err(EnvError::InvalidConfig(_))
        ));
        assert!(make("tictactoe", &json!({"size": 4})).is_err());
    }

    #[test]
    fn normalization_fills_defaults() {
        let a = normalize_config("rps", &json!({})).unwrap();
        let b = normalize_config("rps", &json!({"num_rounds": 5})).unwrap();
        assert_eq!(a, b);
        let scenario = serde_json::from_str::<Value>(cleanup::FIG5_SCENARIO_JSON).unwrap();
        assert_eq!(
            normalize_config("cleanup", &scenario).unwrap(),
            normalize_config("cleanup", &Value::Null).unwrap()
        );
    }
}
