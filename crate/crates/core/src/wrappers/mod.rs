//! Parallel-API adapters and the API-compliance checker.

pub mod compliance;
pub mod mutants;
pub mod parallel;

pub use compliance::{api_check, ComplianceReport, ComplianceViolation};
pub use parallel::{from_parallel, to_parallel, FromParallel, FromParallelEnv, ParallelEnv, ParallelStep, ToParallel};
