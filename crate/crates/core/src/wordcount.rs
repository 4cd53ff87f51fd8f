//! Streaming top-k word count on the simulated DAG.
//!
//! Workers hold partial counters per key. Every `period` messages all
//! partials are flushed to a single aggregator and cleared; a final flush
//! happens at the end of the stream. The report tracks how many counters
//! were alive at once and how many partial records the aggregator received.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::estimation::Estimation;
use crate::model::{KeyId, RunConfig};
use crate::partition::PartitionerKind;
use crate::sim::{parallel_map, Router, RoutingPlan};
use crate::workload::Workload;

#[derive(Clone, Debug, Default)]
pub struct PartialCounterStore {
    workers: Vec<HashMap<KeyId, u64>>,
    live: u64,
}

impl PartialCounterStore {
    pub fn new(workers: usize) -> Self {
        PartialCounterStore {
            workers: vec![HashMap::new(); workers],
            live: 0,
        }
    }

    pub fn add(&mut self, worker: usize, key: KeyId) {
        let c = self.workers[worker].entry(key).or_insert(0);
        if *c == 0 {
            self.live += 1;
        }
        *c += 1;
    }

    /// Distinct `(worker, key)` counters currently held.
    pub fn live_counters(&self) -> u64 {
        self.live
    }

    pub fn worker(&self, worker: usize) -> &HashMap<KeyId, u64> {
        &self.workers[worker]
    }

    /// Empties every worker, handing each `(key, partial)` to `sink`.
    /// Returns the number of records emitted.
    pub fn flush(&mut self, mut sink: impl FnMut(KeyId, u64)) -> u64 {
        let mut records = 0;
        for store in &mut self.workers {
            for (k, c) in store.drain() {
                sink(k, c);
                records += 1;
            }
        }
        self.live = 0;
        records
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlushRecord {
    /// Messages processed when the flush happened.
    pub timestamp: u64,
    pub records: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregationReport {
    pub policy: String,
    pub workers: usize,
    /// Aggregation period in messages; `None` flushes only at the end.
    pub period: Option<u64>,
    pub messages: u64,
    pub distinct_keys: u64,
    /// Partial records received by the aggregator over the whole run.
    pub flush_records: u64,
    pub peak_counters: u64,
    pub flushes: Vec<FlushRecord>,
    pub totals: HashMap<KeyId, u64>,
    /// `k` most frequent keys, count descending then key id ascending.
    pub final_topk: Vec<(KeyId, u64)>,
}

/// The `k` largest entries of `totals`, ties by ascending key id.
pub fn top_k(totals: &HashMap<KeyId, u64>, k: usize) -> Vec<(KeyId, u64)> {
    let mut all: Vec<(KeyId, u64)> = totals.iter().map(|(&k, &c)| (k, c)).collect();
    all.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn run_wordcount(
    config: &RunConfig,
    kind: PartitionerKind,
    estimation: Option<Estimation>,
    workload: &Workload,
    period: Option<u64>,
    k: usize,
) -> Result<AggregationReport> {
    if !matches!(
        kind,
        PartitionerKind::KeyGrouping | PartitionerKind::ShuffleGrouping | PartitionerKind::Pkg
    ) {
        return Err(Error::usage(format!(
            "word count supports kg, sg and pkg, not {kind}"
        )));
    }
    if period == Some(0) {
        return Err(Error::usage(
            "aggregation period must be at least 1 message",
        ));
    }
    let plan = RoutingPlan {
        kind,
        estimation,
        split: Default::default(),
    };
    let mut router = Router::new(*config, plan, None)?;
    let mut store = PartialCounterStore::new(config.workers);
    let mut totals: HashMap<KeyId, u64> = HashMap::new();
    let mut flushes = Vec::new();
    let mut flush_records = 0;
    let mut peak = 0;

    let mut flush = |store: &mut PartialCounterStore, t: u64, flushes: &mut Vec<FlushRecord>| {
        let records = store.flush(|key, c| *totals.entry(key).or_insert(0) += c);
        flushes.push(FlushRecord {
            timestamp: t,
            records,
        });
        records
    };

    for msg in workload.stream() {
        let routed = router.route(&msg);
        store.add(routed.worker, msg.key);
        peak = peak.max(store.live_counters());
        let t = router.processed();
        if period.is_some_and(|p| t % p == 0) {
            flush_records += flush(&mut store, t, &mut flushes);
        }
    }
    if store.live_counters() > 0 {
        flush_records += flush(&mut store, router.processed(), &mut flushes);
    }

    let final_topk = top_k(&totals, k);
    Ok(AggregationReport {
        policy: plan.label(),
        workers: config.workers,
        period,
        messages: router.processed(),
        distinct_keys: totals.len() as u64,
        flush_records,
        peak_counters: peak,
        flushes,
        totals,
        final_topk,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryRow {
    pub policy: String,
    pub workers: usize,
    pub distinct_keys: u64,
    pub peak_counters: u64,
    pub flush_records: u64,
}

/// Peak counter memory for every `(policy, W)` pair with no periodic flush.
pub fn memory_comparison(
    base: &RunConfig,
    workload: &Workload,
    workers: &[usize],
    policies: &[PartitionerKind],
) -> Result<Vec<MemoryRow>> {
    let jobs: Vec<(PartitionerKind, usize)> = policies
        .iter()
        .flat_map(|&p| workers.iter().map(move |&w| (p, w)))
        .collect();
    parallel_map(jobs, |(policy, w)| {
        let cfg = RunConfig {
            workers: w,
            ..*base
        };
        let r = run_wordcount(&cfg, policy, None, workload, None, 0)?;
        Ok(MemoryRow {
            policy: r.policy,
            workers: w,
            distinct_keys: r.distinct_keys,
            peak_counters: r.peak_counters,
            flush_records: r.flush_records,
        })
    })
    .into_iter()
    .collect()
}
