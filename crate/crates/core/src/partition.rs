//! Routing policies: key grouping, shuffle grouping, static power of two
//! choices, online and offline greedy, and partial key grouping.
//!
//! Every policy answers the same question: given the next key and a view of
//! worker loads, which worker gets the message. Argmin ties always go to the
//! earliest candidate (h_1's choice before h_2's, worker 0 before worker 1).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hashing::HashFamily;
use crate::model::{KeyId, LoadVector, WorkerId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartitionerKind {
    /// Key grouping: `h_1(k)`.
    KeyGrouping,
    /// Shuffle grouping: round-robin per source.
    ShuffleGrouping,
    /// Power of two choices without key splitting; first choice is pinned.
    PotcStatic,
    OnGreedy,
    OffGreedy,
    /// Partial key grouping: power of two choices with key splitting.
    Pkg,
}

impl PartitionerKind {
    pub const ALL: [PartitionerKind; 6] = [
        PartitionerKind::KeyGrouping,
        PartitionerKind::ShuffleGrouping,
        PartitionerKind::PotcStatic,
        PartitionerKind::OnGreedy,
        PartitionerKind::OffGreedy,
        PartitionerKind::Pkg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PartitionerKind::KeyGrouping => "kg",
            PartitionerKind::ShuffleGrouping => "sg",
            PartitionerKind::PotcStatic => "potc",
            PartitionerKind::OnGreedy => "ongreedy",
            PartitionerKind::OffGreedy => "offgreedy",
            PartitionerKind::Pkg => "pkg",
        }
    }

    /// Policies that send every occurrence of a key to one worker.
    pub fn is_static(self) -> bool {
        matches!(
            self,
            PartitionerKind::KeyGrouping
                | PartitionerKind::PotcStatic
                | PartitionerKind::OnGreedy
                | PartitionerKind::OffGreedy
        )
    }

    /// Whether the policy reads a load view at all.
    pub fn uses_load(self) -> bool {
        matches!(
            self,
            PartitionerKind::PotcStatic | PartitionerKind::OnGreedy | PartitionerKind::Pkg
        )
    }
}

impl fmt::Display for PartitionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartitionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PartitionerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::usage(format!("unknown partitioner '{s}'")))
    }
}

/// Key to worker assignments for the static policies; entries never change.
pub type RoutingTable = HashMap<KeyId, WorkerId>;

/// Occurrences of each key over a whole stream.
pub type KeyFrequencyTable = HashMap<KeyId, u64>;

/// Common step interface of all routing policies.
pub trait Partitioner {
    fn kind(&self) -> PartitionerKind;

    /// Picks the worker for the next message with `key`, given the load view
    /// this instance is configured with.
    fn route(&mut self, key: KeyId, loads: &LoadVector) -> WorkerId;
}

pub fn kg_route(family: &HashFamily, key: KeyId) -> WorkerId {
    family.hash(0, key)
}

#[derive(Clone, Debug)]
pub struct KeyGrouping {
    family: HashFamily,
}

impl KeyGrouping {
    pub fn new(family: HashFamily) -> Self {
        KeyGrouping { family }
    }
}

impl Partitioner for KeyGrouping {
    fn kind(&self) -> PartitionerKind {
        PartitionerKind::KeyGrouping
    }

    fn route(&mut self, key: KeyId, _loads: &LoadVector) -> WorkerId {
        kg_route(&self.family, key)
    }
}

/// Round-robin counter of one source.
#[derive(Clone, Debug)]
pub struct ShuffleGrouping {
    workers: usize,
    counter: u64,
}

impl ShuffleGrouping {
    pub fn new(workers: usize) -> Self {
        ShuffleGrouping {
            workers,
            counter: 0,
        }
    }

    pub fn next_worker(&mut self) -> WorkerId {
        let w = (self.counter % self.workers as u64) as WorkerId;
        self.counter += 1;
        w
    }
}

impl Partitioner for ShuffleGrouping {
    fn kind(&self) -> PartitionerKind {
        PartitionerKind::ShuffleGrouping
    }

    fn route(&mut self, _key: KeyId, _loads: &LoadVector) -> WorkerId {
        self.next_worker()
    }
}

/// Static power of two choices: the first occurrence of a key picks the less
/// loaded of its candidates, later occurrences follow the table.
pub fn potc_static_route(
    family: &HashFamily,
    key: KeyId,
    table: &mut RoutingTable,
    loads: &LoadVector,
) -> WorkerId {
    *table.entry(key).or_insert_with(|| {
        let choices = family.choices(key);
        loads.argmin_among(&choices)
    })
}

#[derive(Clone, Debug)]
pub struct PotcStatic {
    family: HashFamily,
    table: RoutingTable,
}

impl PotcStatic {
    pub fn new(family: HashFamily) -> Self {
        PotcStatic {
            family,
            table: RoutingTable::new(),
        }
    }

    pub fn table(&self) -> &RoutingTable {
        &self.table
    }
}

impl Partitioner for PotcStatic {
    fn kind(&self) -> PartitionerKind {
        PartitionerKind::PotcStatic
    }

    fn route(&mut self, key: KeyId, loads: &LoadVector) -> WorkerId {
        potc_static_route(&self.family, key, &mut self.table, loads)
    }
}

/// Online greedy: a new key goes to the globally least loaded worker.
pub fn on_greedy_route(key: KeyId, table: &mut RoutingTable, loads: &LoadVector) -> WorkerId {
    *table.entry(key).or_insert_with(|| loads.argmin())
}

#[derive(Clone, Debug, Default)]
pub struct OnGreedy {
    table: RoutingTable,
}

impl OnGreedy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn table(&self) -> &RoutingTable {
        &self.table
    }
}

impl Partitioner for OnGreedy {
    fn kind(&self) -> PartitionerKind {
        PartitionerKind::OnGreedy
    }

    fn route(&mut self, key: KeyId, loads: &LoadVector) -> WorkerId {
        on_greedy_route(key, &mut self.table, loads)
    }
}

/// Offline greedy assignment (longest processing time first): keys by
/// decreasing frequency, ties by ascending key id, each onto the worker with
/// the least weight assigned so far.
pub fn off_greedy_assign(freqs: &KeyFrequencyTable, workers: usize) -> RoutingTable {
    let mut keys: Vec<(KeyId, u64)> = freqs.iter().map(|(&k, &c)| (k, c)).collect();
    keys.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut assigned = vec![0u64; workers];
    let mut table = RoutingTable::with_capacity(keys.len());
    for (key, count) in keys {
        let mut w = 0;
        for (i, &a) in assigned.iter().enumerate().skip(1) {
            if a < assigned[w] {
                w = i;
            }
        }
        assigned[w] += count;
        table.insert(key, w);
    }
    table
}

#[derive(Clone, Debug)]
pub struct OffGreedy {
    table: RoutingTable,
    fallback: HashFamily,
}

impl OffGreedy {
    pub fn new(freqs: &KeyFrequencyTable, family: HashFamily) -> Self {
        OffGreedy {
            table: off_greedy_assign(freqs, family.workers()),
            fallback: family,
        }
    }

    pub fn table(&self) -> &RoutingTable {
        &self.table
    }
}

impl Partitioner for OffGreedy {
    fn kind(&self) -> PartitionerKind {
        PartitionerKind::OffGreedy
    }

    fn route(&mut self, key: KeyId, _loads: &LoadVector) -> WorkerId {
        // Keys missing from the pre-scan cannot occur in a replayed stream;
        // fall back to hashing rather than failing.
        match self.table.get(&key) {
            Some(&w) => w,
            None => kg_route(&self.fallback, key),
        }
    }
}

/// Partial key grouping: the least loaded of the key's candidates in `loads`.
/// No table is kept, so consecutive occurrences may land on different candidates.
pub fn pkg_route(family: &HashFamily, key: KeyId, loads: &LoadVector) -> WorkerId {
    let mut best = family.hash(0, key);
    for i in 1..family.d() {
        let c = family.hash(i, key);
        if loads.get(c) < loads.get(best) {
            best = c;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct PartialKeyGrouping {
    family: HashFamily,
}

impl PartialKeyGrouping {
    pub fn new(family: HashFamily) -> Self {
        PartialKeyGrouping { family }
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }
}

impl Partitioner for PartialKeyGrouping {
    fn kind(&self) -> PartitionerKind {
        PartitionerKind::Pkg
    }

    fn route(&mut self, key: KeyId, loads: &LoadVector) -> WorkerId {
        pkg_route(&self.family, key, loads)
    }
}
