//! Reward totals split by the actor whose step emitted them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::trajectory::Trajectory;
use crate::aec::AgentId;

/// `entries[recipient][source]`: total reward `recipient` received from steps taken by `source`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AttributionMatrix {
    pub entries: BTreeMap<AgentId, BTreeMap<AgentId, f64>>,
}

impl AttributionMatrix {
    pub fn get(&self, recipient: &AgentId, source: &AgentId) -> f64 {
        self.entries.get(recipient).and_then(|row| row.get(source)).copied().unwrap_or(0.0)
    }

    pub fn row_sum(&self, recipient: &AgentId) -> f64 {
        self.entries.get(recipient).map_or(0.0, |row| row.values().sum())
    }

    /// Column total for one source.
    pub fn column_sum(&self, source: &AgentId) -> f64 {
        self.entries.values().filter_map(|row| row.get(source)).sum()
    }

    pub fn sources(&self) -> BTreeSet<AgentId> {
        self.entries.values().flat_map(|row| row.keys().cloned()).collect()
    }
}

/// Every (recipient, source) pair that occurs in the records gets an entry, zero or not.
pub fn attribute_rewards(trajectory: &Trajectory) -> AttributionMatrix {
    let mut m = AttributionMatrix::default();
    for r in &trajectory.records {
        for (recipient, reward) in &r.rewards_emitted {
            *m.entries.entry(recipient.clone()).or_default().entry(r.agent.clone()).or_insert(0.0) += reward;
        }
    }
    m
}

impl fmt::Display for AttributionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sources: Vec<AgentId> = self.sources().into_iter().collect();
        write!(f, "{:<14}", "recipient")?;
        for s in &sources {
            write!(f, " {:>12}", s.as_str())?;
        }
        writeln!(f, " {:>12}", "total")?;
        for (recipient, row) in &self.entries {
            write!(f, "{:<14}", recipient.as_str())?;
            for s in &sources {
                write!(f, " {:>12}", row.get(s).map_or("-".to_string(), |v| format!("{v}")))?;
            }
            writeln!(f, " {:>12}", self.row_sum(recipient))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{episode_returns, rollout, PolicySpec, RolloutRequest, Script};

    #[test]
    fn tictactoe_win_is_attributed_to_the_winning_move() {
        let p0 = AgentId::indexed("player", 0);
        let p1 = AgentId::indexed("player", 1);
        let script = Script { actions: BTreeMap::from([(p0.clone(), vec![0, 1, 2]), (p1.clone(), vec![3, 4])]) };
        let out = rollout(&RolloutRequest::new("tictactoe", PolicySpec::Scripted(script), 0, 20)).unwrap();
        let m = attribute_rewards(&out.trajectory);
        assert_eq!(m.get(&p0, &p0), 1.0);
        assert_eq!(m.get(&p1, &p0), -1.0);
        assert_eq!(m.get(&p1, &p1), 0.0);
        let returns = episode_returns(&out.trajectory);
        for (agent, total) in returns {
            assert_eq!(m.row_sum(&agent), total);
        }
    }
}
