use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution as _;
use statrs::distribution::{ContinuousCDF, Normal};

use super::spec::Distribution;
use crate::error::{Error, Result};
use crate::model::{KeyId, Message};

/// Stream used for drift shifts, kept apart from the key draws so a drifted
/// stream is the base stream with rotated key ids.
const DRIFT_STREAM: u64 = 0x6472_6966_7400_0001;

/// Stream for drawing per-seed weight tables.
const WEIGHTS_STREAM: u64 = 0x7765_6967_6874_0001;

/// Probability of each key `1..=K`, indexed from zero. Sums to one. `seed`
/// only matters for distributions whose table is itself random.
pub fn probabilities(dist: &Distribution, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    let k = usize::try_from(dist.keys())
        .ok()
        .filter(|&k| k <= u32::MAX as usize)
        .ok_or_else(|| Error::usage("key count exceeds the sampler limit of 2^32 - 1"))?;
    let mut p = match *dist {
        Distribution::LogNormalRounded { mu, sigma, .. } => lognormal_table(mu, sigma, k),
        Distribution::LogNormal { mu, sigma, .. } => {
            let ln = rand_distr::LogNormal::new(mu, sigma).expect("validated sigma");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(WEIGHTS_STREAM);
            (0..k).map(|_| ln.sample(&mut rng)).collect()
        }
        Distribution::Zipf { exponent, .. } => {
            (1..=k).map(|i| (i as f64).powf(-exponent)).collect()
        }
        Distribution::Uniform { .. } => vec![1.0; k],
        Distribution::HeavyKey { p1, .. } => {
            let mut p = vec![(1.0 - p1) / (k.max(2) - 1) as f64; k];
            p[0] = p1;
            p
        }
    };
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Mass of `round(X)` for `X ~ LogNormal(mu, sigma)` on `0, 1, ..., K - 1`,
/// with everything at or above `K - 1` folded into the last slot.
fn lognormal_table(mu: f64, sigma: f64, k: usize) -> Vec<f64> {
    let normal = Normal::new(mu, sigma).expect("validated sigma");
    // P(a <= ln X < b); upper-tail intervals use the survival function to
    // keep precision far out in the tail.
    let interval = |a: f64, b: f64| -> f64 {
        if a >= mu {
            normal.sf(a) - normal.sf(b)
        } else {
            normal.cdf(b) - normal.cdf(a)
        }
    };
    let mut out = Vec::with_capacity(k);
    let mut lower = f64::NEG_INFINITY;
    for v in 0..k {
        let upper = if v + 1 == k {
            f64::INFINITY
        } else {
            (v as f64 + 0.5).ln()
        };
        out.push(interval(lower, upper).max(0.0));
        lower = upper;
    }
    out
}

/// Seeded i.i.d. sampler of key ids from a synthetic distribution.
#[derive(Clone, Debug)]
pub struct KeySampler {
    alias: WeightedAliasIndex<f64>,
    rng: ChaCha8Rng,
}

impl KeySampler {
    pub fn new(dist: &Distribution, seed: u64) -> Result<Self> {
        let p = probabilities(dist, seed)?;
        let alias = WeightedAliasIndex::new(p)
            .map_err(|e| Error::usage(format!("cannot build key sampler: {e}")))?;
        Ok(KeySampler {
            alias,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn sample(&mut self) -> KeyId {
        self.alias.sample(&mut self.rng) as KeyId + 1
    }
}

/// Messages `0..m` drawn from a synthetic distribution.
#[derive(Clone, Debug)]
pub struct SyntheticStream {
    sampler: KeySampler,
    next: u64,
    messages: u64,
}

impl SyntheticStream {
    pub fn new(dist: &Distribution, messages: u64, seed: u64) -> Result<Self> {
        Ok(SyntheticStream {
            sampler: KeySampler::new(dist, seed)?,
            next: 0,
            messages,
        })
    }
}

impl Iterator for SyntheticStream {
    type Item = Message;

    fn next(&mut self) -> Option<Message> {
        if self.next >= self.messages {
            return None;
        }
        let m = Message::new(self.next, self.sampler.sample());
        self.next += 1;
        Some(m)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.messages - self.next) as usize;
        (left, Some(left))
    }
}

/// Cyclically rotates key ids of an inner stream over `1..=K`, drawing a new
/// random shift in `1..K` at the start of every epoch after the first.
pub struct DriftStream<I> {
    inner: I,
    keys: u64,
    epoch: u64,
    offset: u64,
    rng: ChaCha8Rng,
}

impl<I: Iterator<Item = Message>> DriftStream<I> {
    pub fn new(inner: I, keys: u64, epoch: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DRIFT_STREAM);
        DriftStream {
            inner,
            keys,
            epoch,
            offset: 0,
            rng,
        }
    }

    /// Rank-to-key rotation currently in effect.
    pub fn offset(&self) -> u64 {
        self.offset
    }
}

/// Key id after rotating by `offset` over `1..=keys`.
pub fn rotate_key(key: KeyId, offset: u64, keys: u64) -> KeyId {
    (key - 1 + offset) % keys + 1
}

impl<I: Iterator<Item = Message>> Iterator for DriftStream<I> {
    type Item = Message;

    fn next(&mut self) -> Option<Message> {
        let mut msg = self.inner.next()?;
        if msg.timestamp > 0 && msg.timestamp % self.epoch == 0 && self.keys > 1 {
            let shift = self.rng.random_range(1..self.keys);
            self.offset = (self.offset + shift) % self.keys;
        }
        msg.key = rotate_key(msg.key, self.offset, self.keys);
        Some(msg)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.inner.size_hint()
    }
}

/// Directed edges with Zipf-distributed endpoints: out-degrees follow
/// `src_exponent`, in-degrees `dst_exponent`. Vertex ids are `1..=vertices`;
/// source and destination popularity ranks are decorrelated by an offset.
pub fn power_law_edges(
    vertices: u64,
    edges: u64,
    src_exponent: f64,
    dst_exponent: f64,
    seed: u64,
) -> Result<Vec<(u64, u64)>> {
    let mut src = KeySampler::new(
        &Distribution::Zipf {
            exponent: src_exponent,
            keys: vertices,
        },
        seed,
    )?;
    let mut dst = KeySampler::new(
        &Distribution::Zipf {
            exponent: dst_exponent,
            keys: vertices,
        },
        seed ^ 0x5bd1_e995,
    )?;
    let shift = vertices / 2;
    Ok((0..edges)
        .map(|_| (src.sample(), rotate_key(dst.sample(), shift, vertices)))
        .collect())
}
