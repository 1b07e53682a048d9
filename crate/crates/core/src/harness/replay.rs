//! Re-executes a trajectory's actions and compares every record.

use serde::Serialize;

use super::digest::digest;
use super::trajectory::Trajectory;
use super::HarnessError;
use crate::envs::make;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayOutcome {
    pub ok: bool,
    /// Step index `t` of the first record that did not reproduce.
    pub first_divergence: Option<u64>,
    pub detail: Option<String>,
    pub records_checked: usize,
}

impl ReplayOutcome {
    fn diverged(t: u64, checked: usize, detail: String) -> Self {
        Self { ok: false, first_divergence: Some(t), detail: Some(detail), records_checked: checked }
    }
}

pub fn replay_verify(trajectory: &Trajectory) -> Result<ReplayOutcome, HarnessError> {
    let header = &trajectory.header;
    if digest(&header.config) != header.config_digest {
        return Err(HarnessError::CorruptFile("config does not match config_digest".into()));
    }
    let mut env = make(&header.env, &header.config)?;
    env.reset(header.seed);
    for (i, rec) in trajectory.records.iter().enumerate() {
        let t = rec.t;
        if t != i as u64 {
            return Ok(ReplayOutcome::diverged(t, i, format!("record {i} carries t = {t}")));
        }
        let selected = env.agent_selection();
        if selected.as_ref() != Some(&rec.agent) {
            return Ok(ReplayOutcome::diverged(t, i, format!("selected {selected:?}, recorded {}", rec.agent)));
        }
        let obs = env.observe(&rec.agent)?;
        if digest(&obs) != rec.obs_digest || rec.obs.as_ref().is_some_and(|o| o != &obs) {
            return Ok(ReplayOutcome::diverged(t, i, format!("observation of {} differs", rec.agent)));
        }
        if let Err(e) = env.step(rec.action) {
            return Ok(ReplayOutcome::diverged(t, i, format!("recorded action rejected: {e}")));
        }
        let status = env.status()?;
        if status.rewards != rec.rewards_emitted {
            return Ok(ReplayOutcome::diverged(t, i, "rewards differ".into()));
        }
        if status.dones != rec.dones_after {
            return Ok(ReplayOutcome::diverged(t, i, "dones differ".into()));
        }
    }
    Ok(ReplayOutcome { ok: true, first_divergence: None, detail: None, records_checked: trajectory.records.len() })
}
