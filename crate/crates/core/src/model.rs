//! Domain types shared across the crate and the load/imbalance metrics.
//!
//! Time is the message sequence index: one message arrives per unit of time,
//! so a timestamp is simply the position of a message in its stream.

use std::fmt;

use crate::error::{Error, Result};

/// Interned key identifier.
pub type KeyId = u64;

/// Index of a downstream worker, in `[0, W)`.
pub type WorkerId = usize;

/// One key occurrence flowing from the stream through a source to a worker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Message {
    pub timestamp: u64,
    /// Key used to pick the worker.
    pub key: KeyId,
    /// Key used to pick the source under keyed splitting. Inverted edge
    /// streams carry the edge's source vertex here; otherwise `None` and the
    /// worker key is reused.
    pub source_key: Option<KeyId>,
}

impl Message {
    pub fn new(timestamp: u64, key: KeyId) -> Self {
        Message {
            timestamp,
            key,
            source_key: None,
        }
    }

    pub fn source_routing_key(&self) -> KeyId {
        self.source_key.unwrap_or(self.key)
    }
}

/// Per-worker message counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct LoadVector {
    counts: Vec<u64>,
}

impl LoadVector {
    pub fn zeros(workers: usize) -> Self {
        LoadVector {
            counts: vec![0; workers],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        LoadVector { counts }
    }

    pub fn workers(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, worker: WorkerId) -> u64 {
        self.counts[worker]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.total() as f64 / self.counts.len() as f64
    }

    /// Counts one more message on `worker`.
    pub fn record_route(&mut self, worker: WorkerId) -> Result<()> {
        match self.counts.get_mut(worker) {
            Some(c) => {
                *c += 1;
                Ok(())
            }
            None => Err(Error::usage(format!(
                "worker {worker} out of range for {} workers",
                self.counts.len()
            ))),
        }
    }

    /// Overwrites every entry with `other`'s. Both vectors must have the same width.
    pub fn assign(&mut self, other: &LoadVector) {
        debug_assert_eq!(self.counts.len(), other.counts.len());
        self.counts.copy_from_slice(&other.counts);
    }

    /// Position of the smallest load among `candidates`; the earliest
    /// candidate wins ties.
    pub fn argmin_among(&self, candidates: &[WorkerId]) -> WorkerId {
        let mut best = candidates[0];
        for &c in &candidates[1..] {
            if self.counts[c] < self.counts[best] {
                best = c;
            }
        }
        best
    }

    /// Least loaded worker overall; lowest index wins ties.
    pub fn argmin(&self) -> WorkerId {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate().skip(1) {
            if c < self.counts[best] {
                best = i;
            }
        }
        best
    }
}

impl fmt::Display for LoadVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.counts)
    }
}

/// Maximum load minus average load.
pub fn imbalance(loads: &LoadVector) -> Result<f64> {
    if loads.is_empty() {
        return Err(Error::usage("imbalance of an empty load vector"));
    }
    Ok(loads.max() as f64 - loads.mean())
}

/// Returns a copy of `loads` with `worker` incremented.
pub fn record_route(loads: &LoadVector, worker: WorkerId) -> Result<LoadVector> {
    let mut next = loads.clone();
    next.record_route(worker)?;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImbalanceSample {
    /// Messages processed when the sample was taken.
    pub timestamp: u64,
    pub imbalance: f64,
    pub max_load: u64,
    pub avg_load: f64,
}

impl ImbalanceSample {
    pub fn of(timestamp: u64, loads: &LoadVector) -> Self {
        let max_load = loads.max();
        let avg_load = loads.mean();
        ImbalanceSample {
            timestamp,
            imbalance: max_load as f64 - avg_load,
            max_load,
            avg_load,
        }
    }
}

/// Destination worker of every message, in message order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoutingTrace {
    pub destinations: Vec<WorkerId>,
}

impl RoutingTrace {
    pub fn len(&self) -> usize {
        self.destinations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.destinations.is_empty()
    }
}

/// Fraction of positions at which two traces send the message to the same worker.
///
/// This is positional agreement, not a set overlap: position `i` counts when
/// both traces routed message `i` to the same worker.
pub fn agreement_fraction(a: &RoutingTrace, b: &RoutingTrace) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::usage(format!(
            "trace lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let same = a
        .destinations
        .iter()
        .zip(&b.destinations)
        .filter(|(x, y)| x == y)
        .count();
    Ok(same as f64 / a.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub workers: usize,
    pub sources: usize,
    /// Number of hash choices per key (`d`).
    pub choices: usize,
    pub master_seed: u64,
    /// Messages between imbalance samples; `None` picks `max(1, m / 1000)`.
    pub sample_interval: Option<u64>,
}

impl RunConfig {
    pub fn new(workers: usize, sources: usize) -> Self {
        RunConfig {
            workers,
            sources,
            choices: 2,
            master_seed: 0,
            sample_interval: None,
        }
    }

    pub fn with_choices(mut self, d: usize) -> Self {
        self.choices = d;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_sample_interval(mut self, interval: u64) -> Self {
        self.sample_interval = Some(interval);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::usage("workers must be at least 1"));
        }
        if self.sources == 0 {
            return Err(Error::usage("sources must be at least 1"));
        }
        if self.choices == 0 {
            return Err(Error::usage("choices must be at least 1"));
        }
        if self.sample_interval == Some(0) {
            return Err(Error::usage("sample interval must be at least 1"));
        }
        Ok(())
    }

    pub fn sample_interval_for(&self, messages: u64) -> u64 {
        self.sample_interval.unwrap_or((messages / 1000).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(c: &[u64]) -> LoadVector {
        LoadVector::from_counts(c.to_vec())
    }

    #[test]
    fn imbalance_examples() {
        assert_eq!(imbalance(&lv(&[5, 5, 5])).unwrap(), 0.0);
        assert_eq!(imbalance(&lv(&[10, 0, 0, 0, 0])).unwrap(), 8.0);
        assert_eq!(imbalance(&lv(&[3, 1])).unwrap(), 1.0);
        assert!(matches!(imbalance(&lv(&[])), Err(Error::Usage(_))));
    }

    #[test]
    fn record_route_examples() {
        assert_eq!(record_route(&lv(&[0, 0]), 1).unwrap(), lv(&[0, 1]));
        assert_eq!(record_route(&lv(&[4, 2, 7]), 0).unwrap(), lv(&[5, 2, 7]));
        assert!(record_route(&lv(&[4, 2, 7]), 3).is_err());
    }

    #[test]
    fn agreement_examples() {
        let a = RoutingTrace {
            destinations: vec![0, 1, 2, 3],
        };
        let b = RoutingTrace {
            destinations: vec![0, 1, 0, 0],
        };
        let c = RoutingTrace {
            destinations: vec![1, 0, 3, 2],
        };
        assert_eq!(agreement_fraction(&a, &a).unwrap(), 1.0);
        assert_eq!(agreement_fraction(&a, &c).unwrap(), 0.0);
        assert_eq!(agreement_fraction(&a, &b).unwrap(), 0.5);
        let short = RoutingTrace {
            destinations: vec![0],
        };
        assert!(agreement_fraction(&a, &short).is_err());
    }

    #[test]
    fn ties_prefer_first_candidate() {
        let l = lv(&[3, 1, 1, 0]);
        assert_eq!(l.argmin_among(&[1, 2]), 1);
        assert_eq!(l.argmin_among(&[2, 1]), 2);
        assert_eq!(l.argmin_among(&[0, 3]), 3);
        assert_eq!(lv(&[2, 2, 2]).argmin(), 0);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::new(0, 1).validate().is_err());
        assert!(RunConfig::new(1, 0).validate().is_err());
        assert!(RunConfig::new(1, 1).with_choices(0).validate().is_err());
        assert!(RunConfig::new(1, 1)
            .with_sample_interval(0)
            .validate()
            .is_err());
        assert_eq!(RunConfig::new(2, 1).sample_interval_for(999), 1);
        assert_eq!(RunConfig::new(2, 1).sample_interval_for(10_000), 10);
    }

    proptest! {
        #[test]
        fn imbalance_nonnegative_zero_iff_equal(c in prop::collection::vec(0u64..1000, 1..20)) {
            let l = lv(&c);
            let i = imbalance(&l).unwrap();
            prop_assert!(i >= 0.0);
            let all_equal = c.iter().all(|&x| x == c[0]);
            prop_assert_eq!(i == 0.0, all_equal);
        }

        #[test]
        fn imbalance_permutation_invariant(c in prop::collection::vec(0u64..1000, 1..20), rot in 0usize..20) {
            let mut p = c.clone();
            let r = rot % p.len();
            p.rotate_left(r);
            p.reverse();
            prop_assert_eq!(imbalance(&lv(&c)).unwrap(), imbalance(&lv(&p)).unwrap());
        }

        #[test]
        fn adding_to_argmax_grows_by_one_minus_inv_w(c in prop::collection::vec(0u64..1000, 1..20)) {
            let l = lv(&c);
            let top = c.iter().enumerate().max_by_key(|(_, &v)| v).unwrap().0;
            let next = record_route(&l, top).unwrap();
            let delta = imbalance(&next).unwrap() - imbalance(&l).unwrap();
            let expected = 1.0 - 1.0 / c.len() as f64;
            prop_assert!((delta - expected).abs() < 1e-9);
        }

        #[test]
        fn sum_counts_routes(w in 1usize..16, routes in prop::collection::vec(0usize..16, 0..200)) {
            let mut l = LoadVector::zeros(w);
            let mut n = 0u64;
            for r in routes {
                if l.record_route(r).is_ok() {
                    n += 1;
                }
            }
            prop_assert_eq!(l.total(), n);
        }
    }
}
