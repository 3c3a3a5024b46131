//! Mission planning for constrained multi-debris rendezvous in low Earth orbit.

pub mod astro;
pub mod env;
pub mod eval;
pub mod mcts;
pub mod policy;

/// Derives an independent child seed for `stream` from a user seed
/// (one splitmix64 step over `seed + stream * golden`).
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
