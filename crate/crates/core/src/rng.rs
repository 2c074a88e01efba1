//! Reproducible random substreams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator whose
//! 256-bit key is derived from a master seed and a text label, and whose
//! 64-bit stream id is an index (replicate, start, ...). The key is four
//! successive SplitMix64 outputs seeded with `splitmix(master) ^ fnv1a64(label)`.
//! Both mixers are fixed, so streams are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_130_501;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Independent generator for `(master_seed, label, index)`.
pub fn substream(master_seed: u64, label: &str, index: u64) -> StreamRng {
    let mut state = master_seed;
    let mut s = splitmix64(&mut state) ^ fnv1a64(label.as_bytes());
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// A child seed for handing to APIs that take a plain `u64`.
pub fn derive_seed(master_seed: u64, label: &str, index: u64) -> u64 {
    use rand::RngCore;
    substream(master_seed, label, index).next_u64()
}
