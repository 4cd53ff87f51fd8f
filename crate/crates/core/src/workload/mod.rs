//! Key streams: seeded synthetic generators and file ingestion.

mod generate;
mod ingest;
mod spec;

use std::sync::Arc;

pub use generate::{
    power_law_edges, probabilities, rotate_key, DriftStream, KeySampler, SyntheticStream,
};
pub use ingest::{ingest, ingest_reader, Ingested, Interner};
pub use spec::{Distribution, IngestMode, WorkloadKind, WorkloadSpec};

use crate::error::Result;
use crate::model::Message;
use crate::partition::KeyFrequencyTable;

/// A replayable, finite message stream.
///
/// Synthetic workloads regenerate from their seed on every pass; file
/// workloads are read once and kept in memory.
#[derive(Clone, Debug)]
pub enum Workload {
    Synthetic(WorkloadSpec),
    Materialized {
        messages: Arc<[Message]>,
        interner: Option<Arc<Interner>>,
    },
}

impl Workload {
    /// Validates `spec`, reading the file for file workloads.
    pub fn load(spec: WorkloadSpec) -> Result<Self> {
        spec.kind.validate()?;
        match &spec.kind {
            WorkloadKind::File { path, mode } => Ok(Workload::from(ingest(path, *mode)?)),
            _ => {
                // Fail early on sampler construction errors.
                let _ = generate(&spec)?;
                Ok(Workload::Synthetic(spec))
            }
        }
    }

    pub fn from_messages(messages: Vec<Message>) -> Self {
        Workload::Materialized {
            messages: messages.into(),
            interner: None,
        }
    }

    /// Number of messages `m`.
    pub fn len(&self) -> u64 {
        match self {
            Workload::Synthetic(spec) => synthetic_len(&spec.kind),
            Workload::Materialized { messages, .. } => messages.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stream(&self) -> Box<dyn Iterator<Item = Message> + Send + '_> {
        match self {
            Workload::Synthetic(spec) => generate(spec).expect("validated at load"),
            Workload::Materialized { messages, .. } => Box::new(messages.iter().copied()),
        }
    }

    pub fn interner(&self) -> Option<&Interner> {
        match self {
            Workload::Materialized {
                interner: Some(i), ..
            } => Some(i),
            _ => None,
        }
    }
}

impl From<Ingested> for Workload {
    fn from(ing: Ingested) -> Self {
        Workload::Materialized {
            messages: ing.messages.into(),
            interner: ing.interner.map(Arc::new),
        }
    }
}

fn synthetic_len(kind: &WorkloadKind) -> u64 {
    match kind {
        WorkloadKind::Synthetic { messages, .. } => *messages,
        WorkloadKind::Drift { inner, .. } => synthetic_len(inner),
        WorkloadKind::File { .. } => 0,
    }
}

fn key_count(kind: &WorkloadKind) -> u64 {
    match kind {
        WorkloadKind::Synthetic { distribution, .. } => distribution.keys(),
        WorkloadKind::Drift { inner, .. } => key_count(inner),
        WorkloadKind::File { .. } => 0,
    }
}

/// Generates the message stream of a synthetic (possibly drifting) spec.
pub fn generate(spec: &WorkloadSpec) -> Result<Box<dyn Iterator<Item = Message> + Send>> {
    spec.kind.validate()?;
    generate_kind(&spec.kind, spec.seed)
}

fn generate_kind(
    kind: &WorkloadKind,
    seed: u64,
) -> Result<Box<dyn Iterator<Item = Message> + Send>> {
    match kind {
        WorkloadKind::Synthetic {
            distribution,
            messages,
        } => Ok(Box::new(SyntheticStream::new(
            distribution,
            *messages,
            seed,
        )?)),
        WorkloadKind::Drift { inner, epoch } => {
            let base = generate_kind(inner, seed)?;
            Ok(Box::new(DriftStream::new(
                base,
                key_count(inner),
                *epoch,
                seed,
            )))
        }
        WorkloadKind::File { .. } => Err(crate::error::Error::usage(
            "file workloads are ingested, not generated",
        )),
    }
}

/// Exact occurrence count of every key in `stream`.
pub fn empirical_frequencies(stream: impl IntoIterator<Item = Message>) -> KeyFrequencyTable {
    let mut freqs = KeyFrequencyTable::new();
    for m in stream {
        *freqs.entry(m.key).or_insert(0) += 1;
    }
    freqs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KeyId;

    fn keyed(keys: &[KeyId]) -> Vec<Message> {
        keys.iter()
            .enumerate()
            .map(|(i, &k)| Message::new(i as u64, k))
            .collect()
    }

    #[test]
    fn frequencies_examples() {
        let f = empirical_frequencies(keyed(&[1, 2, 1]));
        assert_eq!(f.len(), 2);
        assert_eq!((f[&1], f[&2]), (2, 1));
        assert!(empirical_frequencies(Vec::new()).is_empty());
    }

    #[test]
    fn uniform_counts_concentrate() {
        let m = 100_000;
        let w = Workload::load(WorkloadSpec::parse("uniform:5,100000", 17).unwrap()).unwrap();
        let f = empirical_frequencies(w.stream());
        assert_eq!(f.values().sum::<u64>(), m);
        let expected = m as f64 / 5.0;
        for k in 1..=5 {
            assert!((f[&k] as f64 - expected).abs() <= 0.05 * expected);
        }
    }

    #[test]
    fn workload_replays_identically() {
        let w = Workload::load(WorkloadSpec::parse("drift:100:(zipf:1.0,50,1000)", 2).unwrap())
            .unwrap();
        assert_eq!(w.len(), 1000);
        let a: Vec<_> = w.stream().collect();
        let b: Vec<_> = w.stream().collect();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
    }

    #[test]
    fn file_workload() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.txt");
        std::fs::write(&p, "x\ny\nx\n").unwrap();
        let spec = WorkloadSpec::new(
            WorkloadKind::File {
                path: p,
                mode: IngestMode::KeyPerLine,
            },
            0,
        );
        let w = Workload::load(spec).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.interner().unwrap().label(1), Some("x"));
    }
}
