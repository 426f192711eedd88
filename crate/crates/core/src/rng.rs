//! Seeded random streams.
//!
//! Every stochastic operation takes a `&mut RandomStream` explicitly. Parallel
//! workloads derive one stream per work item with [`substream`], keyed by the
//! item's grid coordinates, so results never depend on scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Portable, reproducible generator used throughout the crate.
pub type RandomStream = ChaCha8Rng;

pub fn stream(seed: u64) -> RandomStream {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for the work item addressed by `path` under `seed`.
pub fn substream(seed: u64, path: &[u64]) -> RandomStream {
    let key = path
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(1))));
    ChaCha8Rng::seed_from_u64(key)
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a = substream(7, &[1, 2]).next_u64();
        assert_eq!(a, substream(7, &[1, 2]).next_u64());
        assert_ne!(a, substream(7, &[2, 1]).next_u64());
        assert_ne!(a, substream(8, &[1, 2]).next_u64());
    }
}
