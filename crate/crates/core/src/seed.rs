//! Stable seed derivation for randomized analyses.
//!
//! Substreams are keyed by labels so that adding a new analysis never shifts
//! the random numbers an existing one sees.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a global seed with an ordered list of labels.
pub fn derive_seed(global: u64, labels: &[&str]) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(global);
    for label in labels {
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        // separator so ["ab", "c"] and ["a", "bc"] differ
        h ^= 0xff;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Mixes a seed with an integer index.
pub fn derive_index(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}
