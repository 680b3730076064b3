//! Per-path random streams.
//!
//! Path `i` under master seed `s` draws from a xoshiro256++ generator seeded
//! with `mix64(s ^ mix64(i + GOLDEN))`, where `mix64` is the splitmix64
//! finalizer. Streams never share state, so any partition of path indices
//! over workers reproduces the same per-path draws.

use std::ops::Range;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

pub type PathRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Paths per reduction chunk. Chunks are reduced in index order.
pub const CHUNK: u64 = 1024;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(master_seed: u64, path_index: u64) -> u64 {
    mix64(master_seed ^ mix64(path_index.wrapping_add(GOLDEN)))
}

pub fn path_rng(master_seed: u64, path_index: u64) -> PathRng {
    PathRng::seed_from_u64(stream_seed(master_seed, path_index))
}

/// Derives an independent master seed for a named sub-experiment.
pub fn derive_seed(master_seed: u64, tag: &str) -> u64 {
    tag.bytes()
        .fold(mix64(master_seed ^ GOLDEN), |acc, b| mix64(acc ^ u64::from(b)))
}

/// Maps `f` over fixed-size chunks of `range` in parallel and returns the
/// per-chunk results in index order.
pub fn map_chunks<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let start = range.start;
    let len = range.end.saturating_sub(start);
    let n_chunks = len.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = start + c * CHUNK;
            let hi = (lo + CHUNK).min(range.end);
            f(lo..hi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(path_rng(7, 3), |r, _: u64| Some(r.random::<u64>())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(path_rng(7, 3), |r, _: u64| Some(r.random::<u64>())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(path_rng(7, 4), |r, _: u64| Some(r.random::<u64>())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(7, "restart"), derive_seed(7, "field"));
    }

    #[test]
    fn chunks_cover_range_in_order() {
        let parts = map_chunks(5..5000, |r| (r.start, r.end));
        assert_eq!(parts.first().unwrap().0, 5);
        assert_eq!(parts.last().unwrap().1, 5000);
        for w in parts.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
    }
}
