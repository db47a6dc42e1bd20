//! Deterministic seed derivation.
//!
//! Every randomized component draws from a `ChaCha8Rng` whose seed is derived
//! from the run seed plus a stable tag path (fold, instance, generation, ...).
//! Parallel and serial execution therefore consume identical streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a tag path into a new seed.
pub(crate) fn mix(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(base ^ 0x6366785f73656564); // "cfx_seed"
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// RNG seeded from a base seed and a tag path.
pub(crate) fn rng(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(base, tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn distinct_tag_paths_give_distinct_streams() {
        let a = rng(7, &[1, 2]).next_u64();
        let b = rng(7, &[1, 3]).next_u64();
        let c = rng(7, &[2, 1]).next_u64();
        let again = rng(7, &[1, 2]).next_u64();
        assert_eq!(a, again);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }
}
