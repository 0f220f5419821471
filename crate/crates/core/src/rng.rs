//! Per-replication random streams.
//!
//! Every replication draws from `ChaCha8Rng::seed_from_u64(master)` with the
//! stream selected by the replication index, so a replication's randomness
//! depends only on `(master, rep)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for replication `rep` under `master`.
pub fn replication_rng(master: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(rep);
    rng
}

/// Seeds an auxiliary family of streams (e.g. null-moment tabulation) that
/// must not overlap with the replication streams of `master`.
pub fn auxiliary_seed(master: u64, purpose: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
