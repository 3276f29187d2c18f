//! Stable seed derivation.
//!
//! Every random stream in the arena is keyed by a tuple of integers (or a
//! label) mixed through SplitMix64, so results never depend on thread count,
//! scheduling order, or the platform's `Hash` implementation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes an ordered sequence of words into one seed.
pub fn stable_hash(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(parts.len() as u64), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// FNV-1a over the label bytes, finished with SplitMix.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(h)
}

pub fn rng_from(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn order_matters() {
        assert_ne!(stable_hash(&[1, 2]), stable_hash(&[2, 1]));
        assert_ne!(stable_hash(&[0]), stable_hash(&[0, 0]));
    }

    #[test]
    fn splitmix_reference_output() {
        // First output of the reference SplitMix64 generator seeded with 0.
        assert_eq!(splitmix(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(stable_hash(&[]), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn frozen_values() {
        // Pinned so on-disk datasets keep their seeds across releases.
        assert_eq!(stable_hash(&[7, 3]), 0xb150_ec88_8062_64a8);
        assert_eq!(label_hash("A"), 0x1fcd_1ac0_7bb3_0c63);
        assert_eq!(rng_from(&[1, 2, 3]).next_u64(), 0xfb8c_582f_bad6_21c4);
        assert_ne!(label_hash("A"), label_hash("B"));
    }
}
