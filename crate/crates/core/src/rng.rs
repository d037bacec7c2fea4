//! Deterministic random streams.
//!
//! Every replicate of every experiment draws from its own stream, derived from
//! a 64-bit master seed and the replicate index. The derivation is pinned so
//! that ports to other languages can reproduce the seeding layer exactly:
//!
//! ```text
//! state = master_seed
//! key   = splitmix64(state) XOR replicate_index        (one SplitMix64 step)
//! s0..s3 = four successive SplitMix64 outputs starting from state = key
//! seed  = s0 ‖ s1 ‖ s2 ‖ s3                            (little-endian, 32 bytes)
//! stream = ChaCha8 keyed with `seed`, stream id 0, word position 0
//! ```
//!
//! SplitMix64 is the usual `state += 0x9E3779B97F4A7C15` followed by the
//! `(30, 0xBF58476D1CE4E5B9, 27, 0x94D049BB133111EB, 31)` avalanche.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The pinned generator used everywhere in the crate.
pub type RandomStream = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The 32-byte ChaCha key for `(master_seed, replicate_index)`.
pub fn stream_key(master_seed: u64, replicate_index: u64) -> [u8; 32] {
    let mut state = master_seed;
    let mut key_state = splitmix64(&mut state) ^ replicate_index;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut key_state).to_le_bytes());
    }
    key
}

/// Independent, reproducible stream for one replicate.
pub fn derive_stream(master_seed: u64, replicate_index: u64) -> RandomStream {
    ChaCha8Rng::from_seed(stream_key(master_seed, replicate_index))
}
