//! Deterministic random-number streams.
//!
//! Every stochastic component of the library draws from its own ChaCha8 stream
//! whose seed is derived from a single master seed plus a list of labels. The
//! derivation is pure arithmetic (SplitMix64 absorption), so a run is fully
//! reproducible from its master seed on any platform, and independent
//! components never share a stream: adding draws to one cannot perturb another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream label: peer/altruist placement for a scenario.
pub const STREAM_PLACEMENT: u64 = 1;
/// Stream label: altruist placement (separate from peers so a zero-altruist
/// run consumes nothing from it).
pub const STREAM_ALTRUISTS: u64 = 2;
/// Stream label: flow endpoint assignment.
pub const STREAM_FLOWS: u64 = 3;
/// Stream label: per-node MAC decisions (channel picks, backoff, veto waits).
pub const STREAM_MAC: u64 = 4;
/// Stream label: per-source packet arrival process.
pub const STREAM_TRAFFIC: u64 = 5;
/// Stream label: campaign point/replication expansion.
pub const STREAM_CAMPAIGN: u64 = 6;

/// SplitMix64 output function: the standard avalanche mix.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an ordered list of labels.
///
/// Each label is absorbed through one SplitMix64 round, so
/// `derive_seed(s, &[a, b])` differs from `derive_seed(s, &[b, a])`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &label in labels {
        state = splitmix64(state ^ label);
    }
    state
}

/// A ChaCha8 stream seeded from `master` and `labels` via [`derive_seed`].
pub fn stream(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable() {
        // Frozen values: the seed derivation is part of the reproducibility
        // contract, so a change here is a breaking change.
        assert_eq!(derive_seed(0, &[]), 16294208416658607535);
        assert_eq!(derive_seed(42, &[STREAM_MAC, 7]), derive_seed(42, &[STREAM_MAC, 7]));
        assert_ne!(derive_seed(42, &[STREAM_MAC, 7]), derive_seed(42, &[7, STREAM_MAC]));
        assert_ne!(derive_seed(42, &[STREAM_MAC]), derive_seed(43, &[STREAM_MAC]));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut a = stream(9, &[STREAM_TRAFFIC, 3]);
        let mut b = stream(9, &[STREAM_TRAFFIC, 3]);
        let mut c = stream(9, &[STREAM_TRAFFIC, 4]);
        let xs: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.random()).collect();
        let zs: Vec<u64> = (0..8).map(|_| c.random()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }
}
