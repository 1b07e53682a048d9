//! Constructive conversions between tabular POSGs and AEC games, and an
//! enumeration-based equivalence checker.
//!
//! * [`posg_to_aec`]: states `S × A_1 × … × A_N`; agents queue their action
//!   into their slot, the environment resolves the queued joint action.
//! * [`aec_to_posg_det`]: states `S × {0..N}` carrying whose turn it is.
//! * [`aec_to_posg_general`]: states `S × {0..N} × ℛ_1 × … × ℛ_N`, where the
//!   last component is the reward vector the step into that state produced.

mod aec_to_posg;
mod equivalence;
mod posg_to_aec;

pub use aec_to_posg::{aec_to_posg_det, aec_to_posg_general, DEFAULT_REWARD_PRODUCT_CAP, GENERAL_OBSERVATION_NOTE};
pub use equivalence::{check_equivalence, Direction, EquivalenceReport, ProfileResult};
pub use posg_to_aec::posg_to_aec;

use thiserror::Error;

use crate::formal::FormalError;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ConversionError {
    #[error(transparent)]
    Formal(#[from] FormalError),
    #[error("rewards are not deterministic; use the general construction")]
    NondeterministicRewards,
    #[error("reward set product {size} exceeds the cap of {cap}")]
    RewardSetTooLarge { size: u128, cap: u128 },
    #[error("no state correspondence: {0}")]
    MissingCorrespondence(String),
}
