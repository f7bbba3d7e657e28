use sha2::{Digest, Sha256};

/// Seed for one run of a sweep.
///
/// The first eight bytes, read little-endian, of
/// `SHA-256("gossip-dual/sweep" || base_seed (u64 LE) || key || 0x00 || value (f64 bits, u64 LE))`.
pub fn derive_seed(base_seed: u64, key: &str, value: f64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"gossip-dual/sweep");
    h.update(base_seed.to_le_bytes());
    h.update(key.as_bytes());
    h.update([0u8]);
    h.update(value.to_bits().to_le_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_decorrelated() {
        assert_eq!(derive_seed(7, "eta", 0.05), derive_seed(7, "eta", 0.05));
        assert_ne!(derive_seed(7, "eta", 0.05), derive_seed(7, "eta", 0.1));
        assert_ne!(derive_seed(7, "eta", 0.05), derive_seed(8, "eta", 0.05));
        assert_ne!(derive_seed(7, "eta", 1.0), derive_seed(7, "p_up", 1.0));
    }
}
