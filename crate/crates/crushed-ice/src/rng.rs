//! Counter-based reproducible random streams.
//!
//! All randomness in the crate flows from a single master seed through
//! [`substream`]: a stream is addressed by a namespace plus integer
//! coordinates such as `(n, environment, path)`. Streams with different
//! addresses are statistically independent, and a given address always
//! yields the same generator, so batch results do not depend on worker
//! count or scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream namespaces, so different subsystems never collide on addresses.
pub mod ns {
    pub const OBSTACLES: u64 = 0x01;
    pub const PATHS: u64 = 0x02;
    pub const CLOCK: u64 = 0x03;
    pub const CAPACITY: u64 = 0x04;
    pub const ENERGY: u64 = 0x05;
    pub const START_LAW: u64 = 0x06;
    pub const HARNESS: u64 = 0x07;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha8 stream from `(seed, address)`.
///
/// The address words are absorbed through a SplitMix64 chain and expanded
/// into the full 256-bit ChaCha seed.
pub fn substream(seed: u64, address: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    let _ = splitmix64(&mut state);
    for &word in address {
        state ^= word.wrapping_mul(0x2545_f491_4f6c_dd1d);
        let _ = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substream_is_deterministic() {
        let mut a = substream(42, &[ns::PATHS, 3, 7]);
        let mut b = substream(42, &[ns::PATHS, 3, 7]);
        let xs: Vec<u64> = (0..16).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.random()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn different_addresses_differ() {
        let mut a = substream(42, &[ns::PATHS, 3, 7]);
        let mut b = substream(42, &[ns::PATHS, 3, 8]);
        let mut c = substream(43, &[ns::PATHS, 3, 7]);
        let x: u64 = a.random();
        assert_ne!(x, b.random::<u64>());
        assert_ne!(x, c.random::<u64>());
    }

    #[test]
    fn address_words_do_not_telescope() {
        // (1, 2) and (1 ^ something, ...) style collisions should not happen
        // for small addresses; spot-check a few.
        let mut seen = std::collections::HashSet::new();
        for i in 0..20u64 {
            for j in 0..20u64 {
                let mut r = substream(7, &[i, j]);
                assert!(seen.insert(r.random::<u128>()));
            }
        }
    }
}
