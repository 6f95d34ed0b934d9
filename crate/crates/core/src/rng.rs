//! Seeded random number generation.
//!
//! Every stochastic routine takes an explicit 64-bit seed. Generators are
//! xoshiro256++ seeded through SplitMix64, and child seeds are derived with
//! the same SplitMix64 finaliser so that draw `i` of a bank never depends on
//! how many draws precede it.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

/// Generator for a given seed.
pub fn rng(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `index` of `seed`.
pub fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Child seed for a named stream, e.g. `stream(seed, "reference")`.
pub fn stream(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label keeps stream ids stable across platforms.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(seed, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn same_seed_same_sequence() {
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = rng(7);
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = rng(7);
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| derive(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(stream(1, "data"), stream(1, "reference"));
        assert_ne!(derive(1, 0), derive(2, 0));
    }

    #[test]
    fn frozen_first_draw() {
        // Frozen values: changing the generator or the seed derivation
        // silently changes every experiment output.
        let mut r = rng(0);
        assert_eq!(r.random::<u64>(), 5_987_356_902_031_041_503);
        assert_eq!(derive(0, 0), 11_133_151_466_687_998_564);
        assert_eq!(stream(5, "reference"), 15_239_191_995_791_309_407);
    }
}
