//! Finite tabular POSGs and AEC games: validation, sampling and exact
//! forward enumeration.
//!
//! Enumeration is the oracle the conversion checks rely on, so it is written
//! directly against the dense tables and shares no code with simulation.

mod enumerate;
mod generate;
mod policy;
mod simulate;
mod spec;
mod spec_env;
mod validate;

pub use enumerate::{
    enumerate_aec, enumerate_aec_distribution, enumerate_posg, enumerate_posg_distribution,
    total_variation, AecKey, AecSeries, Distribution, PosgKey, PosgSeries, DEFAULT_BRANCH_CAP,
};
pub use generate::{random_aec, random_posg, GenParams};
pub use policy::{battery, Policy, PolicyProfile, DETERMINISTIC_BATTERY_LIMIT, STOCHASTIC_BATTERY_SIZE};
pub use simulate::{simulate_aec, simulate_posg, SpecTrajectory};
pub use spec::*;
pub use spec_env::{SpecEnv, SpecGame};
pub use validate::{
    compile_aec, compile_posg, validate_aec, validate_posg, CompiledAec, CompiledPosg,
    PosgBranch, ValidationReport, Violation, ViolationKind, SUM_TOLERANCE,
};

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum FormalError {
    #[error("invalid spec:\n{0}")]
    InvalidSpec(ValidationReport),
    #[error("enumeration support reached {branches} branches, above the cap of {cap}")]
    StateSpaceExplosion { branches: usize, cap: usize },
    #[error("policy profile does not match the game: {0}")]
    PolicyMismatch(String),
}

/// Validates either kind of spec.
pub fn validate_spec(spec: &AnySpec) -> ValidationReport {
    match spec {
        AnySpec::Posg(p) => validate_posg(p),
        AnySpec::Aec(a) => validate_aec(a),
    }
}
