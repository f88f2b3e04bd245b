//! Stable content hashes for configurations and assembled objects.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of the JSON encoding of `value`.
pub fn stable_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_deterministic_and_sensitive() {
        let a = stable_hash(&(1.0, "x"));
        assert_eq!(a, stable_hash(&(1.0, "x")));
        assert_ne!(a, stable_hash(&(1.5, "x")));
        assert_eq!(a.len(), 16);
    }
}
