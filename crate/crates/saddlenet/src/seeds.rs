//! Named substream derivation so each randomness consumer (topology, walks,
//! features, initial state, ...) gets an independent seed from the master.

use sha2::{Digest, Sha256};

pub fn derive(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_split_streams() {
        assert_ne!(derive(7, "walks"), derive(7, "features"));
        assert_eq!(derive(7, "walks"), derive(7, "walks"));
        assert_ne!(derive(7, "walks"), derive(8, "walks"));
    }
}
