//! 64-bit content digests over canonical JSON.
//!
//! Canonical form is `serde_json` output of the value: struct fields in
//! declaration order, maps sorted by key, reals in shortest round-trip form.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 8 bytes of SHA-256 over the canonical JSON, as 16 hex digits.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("digestable values serialize");
    digest_bytes(&bytes)
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aec::Observation;

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = Observation::Discrete(3);
        assert_eq!(digest(&a), digest(&Observation::Discrete(3)));
        assert_ne!(digest(&a), digest(&Observation::Discrete(4)));
        assert_eq!(digest(&a).len(), 16);
        // Known vector: SHA-256("") starts with e3b0c44298fc1c14.
        assert_eq!(digest_bytes(b""), "e3b0c44298fc1c14");
    }
}
