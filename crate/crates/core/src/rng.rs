//! Seeded, splittable random number generation.
//!
//! Every stochastic operation in the toolkit takes an explicit `u64` seed and
//! builds a [`ChaCha8Rng`] from it. Independent sub-streams (one per tree,
//! per fold, per epoch, ...) are obtained with [`derive_seed`], which mixes
//! the parent seed and a stream index through the SplitMix64 finalizer. The
//! resulting streams are identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng64 = ChaCha8Rng;

/// Build the toolkit's generator from a seed.
pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive the seed of sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform index in `0..n` drawn through a `u64` so the stream does not
/// depend on the platform's pointer width.
pub fn index(rng: &mut Rng64, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.gen_range(0..n as u64) as usize
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut Rng64, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = index(rng, i + 1);
        items.swap(i, j);
    }
}

/// A uniformly random permutation of `0..n`.
pub fn permutation(rng: &mut Rng64, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut idx);
    idx
}

/// `k` distinct indices from `0..n`, returned in ascending order.
pub fn sample_distinct(rng: &mut Rng64, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + index(rng, n - i);
        idx.swap(i, j);
    }
    let mut out = idx[..k].to_vec();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_streams_differ() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, 0));
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut rng = rng_from_seed(3);
        let mut p = permutation(&mut rng, 100);
        p.sort_unstable();
        assert_eq!(p, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn sample_distinct_sorted_unique() {
        let mut rng = rng_from_seed(11);
        let s = sample_distinct(&mut rng, 50, 7);
        assert_eq!(s.len(), 7);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(s.iter().all(|&i| i < 50));
    }
}
