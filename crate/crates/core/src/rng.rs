//! Seed derivation and platform-independent Bernoulli draws.
//!
//! Trial seeds are derived with the SplitMix64 finalizer folded over a list of
//! labels, so every (master, learner, s, N, trial) tuple owns an independent
//! ChaCha8 stream regardless of which worker runs it.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and an ordered list of labels.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix64(master), |h, &label| {
        mix64(h ^ mix64(label.wrapping_add(GOLDEN_GAMMA)))
    })
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer threshold `t` such that `u < t` for uniform 64-bit `u` has
/// probability `p` (up to 2⁻⁶⁴ rounding).
pub fn bernoulli_threshold(p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        // exact for dyadic p; the float-to-int cast truncates toward zero
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

#[inline]
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, threshold: u64) -> bool {
    threshold == u64::MAX || rng.next_u64() < threshold
}
