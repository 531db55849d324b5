//! Counter-keyed random streams.
//!
//! A stream is identified by a base seed, a purpose tag and a list of
//! indices. Deriving the key never depends on what else has been drawn, so
//! any sample of any sweep cell can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Key for `(base, tag, indices...)`.
pub fn stream_key(base: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = mix64(base ^ fnv1a(tag.as_bytes()));
    for &i in indices {
        h = mix64(h ^ i);
    }
    h
}

/// A generator on substream `lane` of `key`. Lanes of the same key are
/// independent ChaCha streams.
pub fn lane_rng(key: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(lane);
    rng
}
