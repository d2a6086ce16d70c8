//! Seeded random substreams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream whose seed is
//! derived from the master seed and a path of tags (scheme, grid value,
//! replicate, purpose). Cells of a sweep therefore never share randomness, and
//! adding a new cell does not perturb the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a hash of a purpose label, used to turn names into tags.
pub const fn tag(label: &str) -> u64 {
    let bytes = label.as_bytes();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        i += 1;
    }
    hash
}

/// Derives the substream for `path` under `master_seed`.
pub fn substream(master_seed: u64, path: &[u64]) -> Stream {
    let mut state = splitmix64(master_seed);
    for &t in path {
        state = splitmix64(state ^ splitmix64(t.wrapping_add(GOLDEN)));
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_mut(8).enumerate() {
        let word = splitmix64(state.wrapping_add(i as u64));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
