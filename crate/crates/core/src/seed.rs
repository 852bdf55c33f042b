//! Platform-independent randomness for the sensing operators.
//!
//! Every random choice made while building an operator comes from a
//! [`ChaCha8Rng`] seeded through [`SeedableRng::seed_from_u64`]. Sub-seeds are
//! derived from the user seed with [`split_seed`], so a single 64-bit value in a
//! measurement bundle reproduces every factor of the sensing matrix.
//!
//! Bounded integers use Lemire's multiply-shift method with rejection, which is
//! unbiased and depends only on the raw `u64` stream. Nothing here relies on the
//! sampling helpers of the `rand` crate, whose algorithms may change between
//! releases.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the `stream`-th sub-seed of `seed`: `mix64(seed + stream * 0x9E3779B97F4A7C15)`.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed.wrapping_add(stream.wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in `0..bound`. `bound` must be nonzero.
pub fn uniform_below<R: RngCore>(rng: &mut R, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let mut product = u128::from(rng.next_u64()) * u128::from(bound);
    let mut low = product as u64;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            product = u128::from(rng.next_u64()) * u128::from(bound);
            low = product as u64;
        }
    }
    (product >> 64) as u64
}

/// Uniform double in `[0, 1)` built from the top 53 bits of one draw.
pub fn uniform_unit<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform random permutation of `0..n` by descending Fisher–Yates.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_below(&mut rng, i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}

/// Uniform `m`-subset of `0..n` drawn by a partial Fisher–Yates shuffle, sorted ascending.
pub fn subset(n: usize, m: usize, seed: u64) -> Vec<usize> {
    assert!(m <= n, "subset size {m} exceeds population {n}");
    let mut rng = rng_from_seed(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + uniform_below(&mut rng, (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool.sort_unstable();
    pool
}
