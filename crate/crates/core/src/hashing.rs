//! Seeded family of `d` hash functions mapping key ids onto workers.
//!
//! Seeds come from a SplitMix64 stream over the master seed. Each hash is the
//! MurmurHash3 64-bit finalizer (`fmix64`) applied twice around the seed, then
//! reduced modulo the worker count. Both mixers are fixed, so routing traces
//! are bit-reproducible across platforms and releases.

use crate::model::{KeyId, WorkerId};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// MurmurHash3 64-bit finalizer.
#[inline]
pub fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// The `counter`-th output of the SplitMix64 stream rooted at `seed`.
#[inline]
fn splitmix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(counter.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives `d` pairwise distinct seeds from `master_seed`.
///
/// Walks the SplitMix64 stream from counter 0; a value equal to an already
/// taken seed is skipped and the counter advances.
pub fn derive_seeds(master_seed: u64, d: usize) -> Vec<u64> {
    let mut seeds = Vec::with_capacity(d);
    let mut counter = 0u64;
    while seeds.len() < d {
        let s = splitmix64(master_seed, counter);
        counter += 1;
        if !seeds.contains(&s) {
            seeds.push(s);
        }
    }
    seeds
}

/// 64-bit hash of `key` under `seed`.
#[inline]
pub fn hash_key(seed: u64, key: KeyId) -> u64 {
    fmix64(fmix64(key ^ seed).wrapping_add(seed))
}

/// `d` independent hash functions onto `[0, W)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashFamily {
    seeds: Vec<u64>,
    workers: usize,
}

impl HashFamily {
    /// Panics if `d` or `workers` is zero; callers validate the run config first.
    pub fn new(master_seed: u64, d: usize, workers: usize) -> Self {
        assert!(d >= 1, "hash family needs at least one function");
        assert!(workers >= 1, "hash family needs at least one worker");
        HashFamily {
            seeds: derive_seeds(master_seed, d),
            workers,
        }
    }

    pub fn d(&self) -> usize {
        self.seeds.len()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    /// `h_i(key) mod W` for the `i`-th function (0-based).
    #[inline]
    pub fn hash(&self, i: usize, key: KeyId) -> WorkerId {
        (hash_key(self.seeds[i], key) % self.workers as u64) as WorkerId
    }

    /// Candidates `[h_1(key), ..., h_d(key)]`; entries may coincide.
    pub fn choices(&self, key: KeyId) -> Vec<WorkerId> {
        let mut out = Vec::with_capacity(self.d());
        self.choices_into(key, &mut out);
        out
    }

    /// Allocation-free variant of [`HashFamily::choices`].
    #[inline]
    pub fn choices_into(&self, key: KeyId, out: &mut Vec<WorkerId>) {
        out.clear();
        out.extend((0..self.d()).map(|i| self.hash(i, key)));
    }
}
