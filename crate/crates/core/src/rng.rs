//! Named, indexed RNG substreams derived from a single seed.
//!
//! Every random draw in the crate goes through [`substream`], so a run is a
//! pure function of its seed and parallel workers can draw independently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Deterministic generator for `(seed, label, index)`.
pub fn substream(seed: u64, label: &str, index: u64) -> Rng {
    // FNV-1a over the label, then a splitmix64 finalizer to decorrelate seeds.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(h)));
    rng.set_stream(index);
    rng
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
