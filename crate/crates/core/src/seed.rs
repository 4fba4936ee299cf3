//! Seed derivation.
//!
//! Every randomized unit of work (a k-means restart, a fold assignment, a
//! sweep cell) draws from its own generator seeded by
//! `derive(master, stage, index)`. The derivation is a pure function of its
//! arguments, so the order in which threads pick up work never changes the
//! numbers that come out.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the stage label.
fn label_hash(stage: &str) -> u64 {
    stage.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for the `index`-th unit of work in `stage` under `master`.
pub fn derive(master: u64, stage: &str, index: u64) -> u64 {
    let s = splitmix64(master ^ label_hash(stage));
    splitmix64(s ^ splitmix64(index.wrapping_add(1)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, stage: &str, index: u64) -> ChaCha8Rng {
    rng(derive(master, stage, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_separates_streams() {
        assert_eq!(derive(7, "kmeans", 3), derive(7, "kmeans", 3));
        assert_ne!(derive(7, "kmeans", 3), derive(7, "kmeans", 4));
        assert_ne!(derive(7, "kmeans", 3), derive(7, "folds", 3));
        assert_ne!(derive(7, "kmeans", 3), derive(8, "kmeans", 3));
    }
}
