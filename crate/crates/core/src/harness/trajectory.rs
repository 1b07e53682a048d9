//! JSONL trajectory files: a header line, then one record per step.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::aec::{Action, AgentId, Observation};

pub const FORMAT: &str = "aec-traj/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub env: String,
    pub config_digest: String,
    pub seed: u64,
    /// Normalized environment config; hashes to `config_digest`.
    pub config: Value,
    #[serde(default)]
    pub full_obs: bool,
}

/// One step. `obs_digest` covers the acting agent's observation just before it acted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: u64,
    pub agent: AgentId,
    pub action: Option<Action>,
    pub rewards_emitted: BTreeMap<AgentId, f64>,
    pub dones_after: BTreeMap<AgentId, bool>,
    pub obs_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<Observation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub header: Header,
    pub records: Vec<Record>,
}

impl Trajectory {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| HarnessError::CorruptFile("empty file".into()))?;
        let header: Header = serde_json::from_str(first)
            .map_err(|e| HarnessError::CorruptFile(format!("line 1: {e}")))?;
        if header.format != FORMAT {
            return Err(HarnessError::CorruptFile(format!(
                "unsupported format {:?}, expected {FORMAT:?}",
                header.format
            )));
        }
        let records = lines
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| HarnessError::CorruptFile(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { header, records })
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}
