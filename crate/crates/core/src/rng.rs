//! Deterministic seed derivation.
//!
//! Every randomized stage of the pipeline draws from its own ChaCha12 stream
//! derived from (master seed, purpose tag, index...). Streams for different
//! tags or indices are independent, and the whole pipeline is reproducible
//! from the single master seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Purpose tags for derived streams. Values are part of the on-disk
/// reproducibility contract; do not renumber.
pub mod purpose {
    pub const CHANNEL: u64 = 1;
    pub const SYMBOLS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SNR: u64 = 4;
    pub const NET_INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const MONTE_CARLO: u64 = 7;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha12 stream from a master seed and a tag path.
pub fn substream(master: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = master ^ 0xD6E8_FEB8_6659_FD93;
    let mut mixed = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x2545_F491_4F6C_DD1D);
        mixed ^= splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    let mut s = mixed;
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
