//! Seeded, splittable random streams.
//!
//! Every stochastic routine takes an explicit `u64` seed. Per-item streams are
//! derived from `(seed, index)` through ChaCha8's stream selector, so work can
//! be sharded across threads without changing any drawn value.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Stream reserved for dataset permutations so it never collides with per-sample streams.
const PERMUTATION_STREAM: u64 = u64::MAX;

/// Independent generator for item `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    fill_normal(rng, &mut v);
    v
}

/// `count` dataset indices drawn from a seeded permutation of `0..n`,
/// truncated when `count <= n` and cycled through fresh permutations otherwise.
pub fn permuted_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    assert!(n > 0, "permutation of an empty index set");
    let mut rng = stream(seed, PERMUTATION_STREAM);
    let mut out = Vec::with_capacity(count);
    let mut perm: Vec<usize> = (0..n).collect();
    while out.len() < count {
        perm.shuffle(&mut rng);
        let take = (count - out.len()).min(n);
        out.extend_from_slice(&perm[..take]);
    }
    out
}
