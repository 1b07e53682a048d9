//! Sequential multi-agent environments built on the agent environment cycle
//! model, with tabular POSG/AEC game models, constructive conversions between
//! them checked by exact enumeration, reference environments, a parallel-API
//! wrapper, a compliance checker and a replay/race-detection harness.

pub mod aec;
pub mod conversions;
pub mod envs;
pub mod exec;
pub mod formal;
pub mod harness;
pub mod wrappers;
