//! Named, independent random streams derived from one master seed.
//!
//! Every source of randomness in a run (placement, destinations,
//! orientations, initial profile, schedule, action choice) draws from its own
//! stream so that changing one knob (say, epsilon) never perturbs an
//! unrelated draw (say, the geometry).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The named randomness consumers of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement,
    Destinations,
    Orientations,
    InitialProfile,
    Schedule,
    Action,
    Baseline,
    Instance,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::Destinations => 2,
            Stream::Orientations => 3,
            Stream::InitialProfile => 4,
            Stream::Schedule => 5,
            Stream::Action => 6,
            Stream::Baseline => 7,
            Stream::Instance => 8,
        }
    }
}

/// RNG for one named stream under `master`. Streams with different names are
/// independent ChaCha streams of the same seeded cipher.
pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream.id());
    rng
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministically derive a child seed from a master seed and a tag path
/// (grid index, realization index, ...). Stable across runs and platforms.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &t in tags {
        h = splitmix64(h ^ t.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut a1 = stream_rng(42, Stream::Placement);
        let mut a2 = stream_rng(42, Stream::Placement);
        let mut b = stream_rng(42, Stream::Schedule);
        let xs: Vec<u64> = (0..8).map(|_| a1.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| a2.next_u64()).collect();
        let zs: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn derived_seeds_differ_by_tag() {
        let s1 = derive_seed(7, &[0, 0]);
        let s2 = derive_seed(7, &[0, 1]);
        let s3 = derive_seed(7, &[1, 0]);
        assert_ne!(s1, s2);
        assert_ne!(s1, s3);
        assert_ne!(s2, s3);
        assert_eq!(s1, derive_seed(7, &[0, 0]));
    }
}
