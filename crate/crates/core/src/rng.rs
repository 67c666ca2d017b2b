//! Counter-based random streams.
//!
//! Every stochastic routine draws from a ChaCha stream keyed by `(seed, stream, step)`, so a
//! result never depends on thread scheduling or on how many draws another routine consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Words of keystream reserved for each step of a stream.
const STEP_WORDS: u32 = 40;

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn keyed_rng(seed: u64, stream: u64, step: u64) -> Rng {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos((step as u128) << STEP_WORDS);
    rng
}

/// Combine two keys into one stream id (splitmix64 finaliser).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b)
        .wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
