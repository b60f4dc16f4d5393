//! Keyed seed derivation.
//!
//! Every random object in the crate is drawn from a ChaCha stream whose seed
//! is a hash of a root seed, a domain label and a tuple of integer keys. The
//! same (root, domain, keys) triple always yields the same stream, regardless
//! of thread scheduling or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn domain_hash(domain: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in domain.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives a 64-bit key from `(root, domain, parts)`.
pub fn derive(root: u64, domain: &str, parts: &[u64]) -> u64 {
    let mut h = mix64(root ^ domain_hash(domain));
    for (i, &p) in parts.iter().enumerate() {
        h = mix64(h ^ mix64(p.wrapping_add((i as u64 + 1) << 58)));
    }
    h
}

/// Like [`derive`] but drops trailing zero parts, so a message tuple padded
/// with singleton axes keys the same stream as the shorter tuple.
pub fn derive_trimmed(root: u64, domain: &str, parts: &[u64]) -> u64 {
    let mut end = parts.len();
    while end > 0 && parts[end - 1] == 0 {
        end -= 1;
    }
    derive(root, domain, &parts[..end])
}

pub fn stream(root: u64, domain: &str, parts: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive(root, domain, parts))
}

pub fn stream_trimmed(root: u64, domain: &str, parts: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_trimmed(root, domain, parts))
}

/// Hashes a byte string under a key; used for lazily defined random maps.
pub fn hash_bytes(key: u64, bytes: &[u8]) -> u64 {
    let mut h = mix64(key);
    let mut chunks = bytes.chunks_exact(8);
    for c in &mut chunks {
        let w = u64::from_le_bytes(c.try_into().unwrap());
        h = mix64(h ^ w);
    }
    let rem = chunks.remainder();
    let mut last = [0u8; 8];
    last[..rem.len()].copy_from_slice(rem);
    h = mix64(h ^ u64::from_le_bytes(last) ^ ((bytes.len() as u64) << 56));
    mix64(h)
}

/// Maps a uniform 64-bit word onto `0..range` (multiply-shift).
#[inline]
pub fn reduce(word: u64, range: u64) -> u64 {
    ((word as u128 * range as u128) >> 64) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_separated() {
        let a: u64 = stream(7, "pool", &[1]).gen();
        let b: u64 = stream(7, "pool", &[1]).gen();
        let c: u64 = stream(7, "pool", &[2]).gen();
        let d: u64 = stream(7, "bin", &[1]).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn trimmed_keys_ignore_trailing_zeros_only() {
        assert_eq!(derive_trimmed(3, "v", &[4, 5, 0]), derive(3, "v", &[4, 5]));
        assert_ne!(derive_trimmed(3, "v", &[0, 5]), derive_trimmed(3, "v", &[5, 0]));
    }

    #[test]
    fn reduce_stays_in_range() {
        for w in [0u64, 1, u64::MAX / 3, u64::MAX] {
            assert!(reduce(w, 17) < 17);
        }
    }
}
