//! Deterministic simulation of a stream feeding `S` sources that route to
//! `W` workers, sampling the imbalance as messages are processed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{Estimation, LoadEstimator, LocalEstimator, ProbingEstimator};
use crate::hashing::{derive_seeds, hash_key, HashFamily};
use crate::model::{
    agreement_fraction, imbalance, ImbalanceSample, LoadVector, Message, RoutingTrace, RunConfig,
    WorkerId,
};
use crate::partition::{
    KeyFrequencyTable, KeyGrouping, OffGreedy, OnGreedy, PartialKeyGrouping, Partitioner,
    PartitionerKind, PotcStatic, ShuffleGrouping,
};
use crate::workload::{empirical_frequencies, Distribution, Workload, WorkloadSpec};

/// Environment variable capping the threads used for sweeps.
pub const THREADS_ENV: &str = "PKG_BALANCE_THREADS";

const SPLIT_SALT: u64 = 0x7370_6c69_7400_0000;

/// How stream messages are dealt to sources.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SourceSplit {
    /// Message `i` goes to source `i mod S`.
    #[default]
    Shuffle,
    /// Hash of the message's source-routing key, with a seed independent of
    /// the worker hash family.
    Keyed,
}

impl fmt::Display for SourceSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceSplit::Shuffle => "shuffle",
            SourceSplit::Keyed => "keyed",
        })
    }
}

impl FromStr for SourceSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffle" => Ok(SourceSplit::Shuffle),
            "keyed" => Ok(SourceSplit::Keyed),
            _ => Err(Error::usage(format!("unknown source split '{s}'"))),
        }
    }
}

/// Routing policy, load estimation and source split of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RoutingPlan {
    pub kind: PartitionerKind,
    /// Only meaningful for PKG; `None` means the global oracle.
    pub estimation: Option<Estimation>,
    pub split: SourceSplit,
}

impl RoutingPlan {
    pub fn new(kind: PartitionerKind) -> Self {
        RoutingPlan {
            kind,
            estimation: None,
            split: SourceSplit::Shuffle,
        }
    }

    pub fn pkg(estimation: Estimation) -> Self {
        RoutingPlan {
            kind: PartitionerKind::Pkg,
            estimation: Some(estimation),
            split: SourceSplit::Shuffle,
        }
    }

    pub fn with_split(mut self, split: SourceSplit) -> Self {
        self.split = split;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.estimation {
            if self.kind != PartitionerKind::Pkg {
                return Err(Error::usage(format!(
                    "load estimation applies to pkg only, not {}",
                    self.kind
                )));
            }
            e.validate()?;
        }
        Ok(())
    }

    /// Estimation actually in effect: global for PKG unless set, none otherwise.
    pub fn effective_estimation(&self) -> Option<Estimation> {
        match self.kind {
            PartitionerKind::Pkg => Some(self.estimation.unwrap_or(Estimation::Global)),
            _ => None,
        }
    }

    /// Label such as `pkg-local` used in reports.
    pub fn label(&self) -> String {
        match self.effective_estimation() {
            Some(e) => format!("{}-{}", self.kind, e.name()),
            None => self.kind.to_string(),
        }
    }
}

enum SourceView {
    Local(LocalEstimator),
    Probing(ProbingEstimator),
}

impl SourceView {
    fn view(&self) -> &LoadVector {
        match self {
            SourceView::Local(e) => e.view(),
            SourceView::Probing(e) => e.view(),
        }
    }

    fn on_route(&mut self, worker: WorkerId) -> Result<()> {
        match self {
            SourceView::Local(e) => e.on_route(worker),
            SourceView::Probing(e) => e.on_route(worker),
        }
    }
}

/// Where one message went.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Routed {
    pub source: usize,
    pub worker: WorkerId,
}

/// The routing layer of the simulated DAG: true loads, one partitioner per
/// source (or one shared instance for the idealized table-based baselines)
/// and per-source load estimates for PKG.
pub struct Router {
    config: RunConfig,
    plan: RoutingPlan,
    split_seed: u64,
    loads: LoadVector,
    partitioners: Vec<Box<dyn Partitioner + Send>>,
    estimates: Vec<SourceView>,
    processed: u64,
}

impl Router {
    /// `freqs` is required for Off-Greedy and ignored otherwise.
    pub fn new(
        config: RunConfig,
        plan: RoutingPlan,
        freqs: Option<&KeyFrequencyTable>,
    ) -> Result<Self> {
        config.validate()?;
        plan.validate()?;
        let family = || HashFamily::new(config.master_seed, config.choices, config.workers);
        let w = config.workers;
        let partitioners: Vec<Box<dyn Partitioner + Send>> = match plan.kind {
            PartitionerKind::KeyGrouping => vec![Box::new(KeyGrouping::new(family()))],
            PartitionerKind::ShuffleGrouping => (0..config.sources)
                .map(|_| Box::new(ShuffleGrouping::new(w)) as Box<dyn Partitioner + Send>)
                .collect(),
            // Table-based baselines share one global table and see true loads.
            PartitionerKind::PotcStatic => vec![Box::new(PotcStatic::new(family()))],
            PartitionerKind::OnGreedy => vec![Box::new(OnGreedy::new())],
            PartitionerKind::OffGreedy => {
                let freqs = freqs.ok_or_else(|| {
                    Error::usage("offgreedy needs the key frequencies of the whole stream")
                })?;
                vec![Box::new(OffGreedy::new(freqs, family()))]
            }
            PartitionerKind::Pkg => vec![Box::new(PartialKeyGrouping::new(family()))],
        };
        let estimates = match plan.effective_estimation() {
            Some(Estimation::Local) => (0..config.sources)
                .map(|s| SourceView::Local(LocalEstimator::new(s, w)))
                .collect(),
            Some(Estimation::Probing { period }) => (0..config.sources)
                .map(|s| SourceView::Probing(ProbingEstimator::new(s, w, period)))
                .collect(),
            _ => Vec::new(),
        };
        Ok(Router {
            config,
            plan,
            split_seed: derive_seeds(config.master_seed ^ SPLIT_SALT, 1)[0],
            loads: LoadVector::zeros(w),
            partitioners,
            estimates,
            processed: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn plan(&self) -> &RoutingPlan {
        &self.plan
    }

    /// True worker loads.
    pub fn loads(&self) -> &LoadVector {
        &self.loads
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// The load estimate of `source`, when PKG runs with local estimation.
    pub fn local_view(&self, source: usize) -> Option<&LoadVector> {
        self.estimates.get(source).map(SourceView::view)
    }

    /// Source that handles `msg` under the configured split.
    pub fn source_for(&self, msg: &Message) -> usize {
        match self.plan.split {
            SourceSplit::Shuffle => (msg.timestamp % self.config.sources as u64) as usize,
            SourceSplit::Keyed => {
                (hash_key(self.split_seed, msg.source_routing_key()) % self.config.sources as u64)
                    as usize
            }
        }
    }

    pub fn route(&mut self, msg: &Message) -> Routed {
        let source = self.source_for(msg);
        let worker = self
            .route_from(source, msg.key)
            .expect("source index in range by construction");
        Routed { source, worker }
    }

    /// Routes one message with `key` through `source` and accounts its load.
    pub fn route_from(&mut self, source: usize, key: u64) -> Result<WorkerId> {
        if source >= self.config.sources {
            return Err(Error::usage(format!(
                "source {source} out of range for {} sources",
                self.config.sources
            )));
        }
        let now = self.processed;
        for est in &mut self.estimates {
            if let SourceView::Probing(p) = est {
                p.probe(&self.loads, now);
            }
        }
        let idx = if self.partitioners.len() == 1 {
            0
        } else {
            source
        };
        let view = match self.estimates.get(source) {
            Some(est) => est.view(),
            None => &self.loads,
        };
        let worker = self.partitioners[idx].route(key, view);
        self.loads.record_route(worker)?;
        if let Some(est) = self.estimates.get_mut(source) {
            est.on_route(worker)?;
        }
        self.processed += 1;
        Ok(worker)
    }
}

/// Outcome of one simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub config: RunConfig,
    pub plan: RoutingPlan,
    pub messages: u64,
    pub series: Vec<ImbalanceSample>,
    pub final_loads: LoadVector,
    /// Mean of the sampled imbalances.
    pub avg_imbalance: f64,
    /// `avg_imbalance / m`.
    pub normalized_avg: f64,
    pub trace: Option<RoutingTrace>,
    /// Source of every message, recorded alongside the trace.
    pub sources: Option<Vec<usize>>,
}

impl RunResult {
    pub fn final_imbalance(&self) -> f64 {
        imbalance(&self.final_loads).unwrap_or(0.0)
    }
}

/// Runs `workload` through the routing plan, sampling `I(t)` every
/// `sample_interval` messages and after the last message.
pub fn run(
    config: &RunConfig,
    plan: &RoutingPlan,
    workload: &Workload,
    keep_trace: bool,
) -> Result<RunResult> {
    let m = workload.len();
    if m == 0 {
        return Err(Error::usage("workload has no messages"));
    }
    let freqs =
        (plan.kind == PartitionerKind::OffGreedy).then(|| empirical_frequencies(workload.stream()));
    let mut router = Router::new(*config, *plan, freqs.as_ref())?;
    let interval = config.sample_interval_for(m);

    let mut series = Vec::with_capacity((m / interval + 1) as usize);
    let mut trace = keep_trace.then(|| Vec::with_capacity(m as usize));
    let mut sources = keep_trace.then(|| Vec::with_capacity(m as usize));
    for msg in workload.stream() {
        let routed = router.route(&msg);
        if let (Some(t), Some(s)) = (trace.as_mut(), sources.as_mut()) {
            t.push(routed.worker);
            s.push(routed.source);
        }
        let done = router.processed();
        if done % interval == 0 || done == m {
            series.push(ImbalanceSample::of(done, router.loads()));
        }
    }

    let avg_imbalance = series.iter().map(|s| s.imbalance).sum::<f64>() / series.len() as f64;
    Ok(RunResult {
        config: *config,
        plan: *plan,
        messages: m,
        series,
        final_loads: router.loads().clone(),
        avg_imbalance,
        normalized_avg: avg_imbalance / m as f64,
        trace: trace.map(|destinations| RoutingTrace { destinations }),
        sources,
    })
}

/// Pairwise positional agreement between the traces of `runs`.
pub fn compare(runs: &[RunResult]) -> Result<Vec<Vec<f64>>> {
    let traces: Vec<&RoutingTrace> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.trace
                .as_ref()
                .ok_or_else(|| Error::usage(format!("run {i} was made without a trace")))
        })
        .collect::<Result<_>>()?;
    traces
        .iter()
        .map(|a| traces.iter().map(|b| agreement_fraction(a, b)).collect())
        .collect()
}

/// Runs jobs on a pool capped by `PKG_BALANCE_THREADS`, returning results in
/// input order.
pub fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
        Err(_) => items.into_iter().map(f).collect(),
    }
}

/// Runs every `(config, plan)` pair over the same workload.
pub fn sweep(
    jobs: Vec<(RunConfig, RoutingPlan)>,
    workload: &Workload,
    keep_trace: bool,
) -> Result<Vec<RunResult>> {
    parallel_map(jobs, |(c, p)| run(&c, &p, workload, keep_trace))
        .into_iter()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryRow {
    pub n: usize,
    pub seed: u64,
    pub messages: u64,
    /// `I(m)` at the end of the run.
    pub imbalance: f64,
    /// `R(n) = I(m) / (m / n)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TheoryReport {
    pub d: usize,
    pub rows: Vec<TheoryRow>,
    /// `(n, median R(n))` in the order of the requested `n` values.
    pub medians: Vec<(usize, f64)>,
}

impl TheoryReport {
    /// Median `R` of the last `n` over that of the first.
    pub fn growth(&self) -> f64 {
        match (self.medians.first(), self.medians.last()) {
            (Some(first), Some(last)) => last.1 / first.1,
            _ => f64::NAN,
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Greedy-d scaling check: `n` workers, keys uniform over `5n`, `m = n^2`,
/// global loads, one source. Each seed drives both the hash family and the
/// key draws.
pub fn theory_check(n_values: &[usize], d: usize, seeds: &[u64]) -> Result<TheoryReport> {
    if n_values.is_empty() || seeds.is_empty() {
        return Err(Error::usage(
            "theory check needs at least one n and one seed",
        ));
    }
    if let Some(&n) = n_values.iter().find(|&&n| n < 8) {
        return Err(Error::usage(format!("n must be at least 8, got {n}")));
    }
    if d == 0 {
        return Err(Error::usage("d must be at least 1"));
    }
    let jobs: Vec<(usize, u64)> = n_values
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows = parallel_map(jobs, |(n, seed)| -> Result<TheoryRow> {
        let m = (n as u64) * (n as u64);
        let workload = Workload::load(WorkloadSpec::synthetic(
            Distribution::Uniform { keys: 5 * n as u64 },
            m,
            seed,
        ))?;
        let config = RunConfig::new(n, 1)
            .with_choices(d)
            .with_seed(seed)
            .with_sample_interval(m);
        let res = run(
            &config,
            &RoutingPlan::pkg(Estimation::Global),
            &workload,
            false,
        )?;
        let imb = res.final_imbalance();
        Ok(TheoryRow {
            n,
            seed,
            messages: m,
            imbalance: imb,
            ratio: imb / (m as f64 / n as f64),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let medians = n_values
        .iter()
        .map(|&n| {
            let mut r: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.ratio).collect();
            (n, median(&mut r))
        })
        .collect();
    Ok(TheoryReport { d, rows, medians })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeavyKeyReport {
    pub p1: f64,
    pub n: usize,
    pub messages: u64,
    pub imbalance: f64,
    /// `I(m) / m`.
    pub fraction: f64,
    /// Expected linear lower bound `(p1/2 - 1/n)`, as a fraction of `m`.
    pub bound: f64,
}

/// Greedy-d on a heavy-key stream: key 1 with probability `p1`, the rest
/// uniform. Once `p1 > 2/n` the imbalance must grow linearly in `m`.
pub fn heavy_key_check(
    p1: f64,
    keys: u64,
    n: usize,
    d: usize,
    messages: u64,
    seed: u64,
) -> Result<HeavyKeyReport> {
    let workload = Workload::load(WorkloadSpec::synthetic(
        Distribution::HeavyKey { p1, keys },
        messages,
        seed,
    ))?;
    let config = RunConfig::new(n, 1)
        .with_choices(d)
        .with_seed(seed)
        .with_sample_interval(messages);
    let res = run(
        &config,
        &RoutingPlan::pkg(Estimation::Global),
        &workload,
        false,
    )?;
    let imb = res.final_imbalance();
    Ok(HeavyKeyReport {
        p1,
        n,
        messages,
        imbalance: imb,
        fraction: imb / messages as f64,
        bound: p1 / 2.0 - 1.0 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    fn wl(spec: &str, seed: u64) -> Workload {
        Workload::load(WorkloadSpec::parse(spec, seed).unwrap()).unwrap()
    }

    #[test]
    fn single_worker_never_imbalanced() {
        let w = wl("zipf:1.2,100,5000", 1);
        for kind in PartitionerKind::ALL {
            let res = run(&RunConfig::new(1, 3), &RoutingPlan::new(kind), &w, false).unwrap();
            assert!(res.series.iter().all(|s| s.imbalance == 0.0), "{kind}");
            assert_eq!(res.final_loads.total(), 5000);
        }
    }

    #[test]
    fn shuffle_single_source_bounded() {
        let w = wl("uniform:8,10000", 1);
        let res = run(
            &RunConfig::new(4, 1),
            &RoutingPlan::new(PartitionerKind::ShuffleGrouping),
            &w,
            false,
        )
        .unwrap();
        assert!(res.final_imbalance() <= 0.75);
        assert!(res.series.iter().all(|s| s.imbalance <= 0.75));
    }

    #[test]
    fn estimation_rejected_for_non_pkg() {
        let w = wl("uniform:8,100", 1);
        let plan = RoutingPlan {
            kind: PartitionerKind::KeyGrouping,
            estimation: Some(Estimation::Local),
            split: SourceSplit::Shuffle,
        };
        assert!(matches!(
            run(&RunConfig::new(4, 1), &plan, &w, false),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn sample_grid() {
        let w = wl("uniform:8,1050", 1);
        let res = run(
            &RunConfig::new(4, 2).with_sample_interval(100),
            &RoutingPlan::new(PartitionerKind::Pkg),
            &w,
            false,
        )
        .unwrap();
        let ts: Vec<u64> = res.series.iter().map(|s| s.timestamp).collect();
        let mut expected: Vec<u64> = (1..=10).map(|i| i * 100).collect();
        expected.push(1050);
        assert_eq!(ts, expected);
        let default = run(
            &RunConfig::new(4, 2),
            &RoutingPlan::new(PartitionerKind::Pkg),
            &w,
            false,
        )
        .unwrap();
        assert_eq!(default.series.len(), 1050);
    }

    #[test]
    fn per_key_destination_counts() {
        let w = wl("zipf:1.1,500,20000", 4);
        let cfg = RunConfig::new(8, 3).with_seed(9);
        for kind in PartitionerKind::ALL {
            let res = run(&cfg, &RoutingPlan::new(kind), &w, true).unwrap();
            let trace = res.trace.unwrap();
            let mut dests: HashMap<u64, HashSet<usize>> = HashMap::new();
            for (msg, &d) in w.stream().zip(&trace.destinations) {
                dests.entry(msg.key).or_default().insert(d);
            }
            let max = dests.values().map(HashSet::len).max().unwrap();
            if kind.is_static() {
                assert!(dests.values().all(|s| s.len() == 1), "{kind}");
            } else if kind == PartitionerKind::Pkg {
                assert!(max <= 2);
            }
        }
    }

    #[test]
    fn single_source_local_equals_global() {
        let w = wl("lognormal:1.789,2.366,2000,20000", 3);
        let cfg = RunConfig::new(10, 1).with_seed(5);
        let g = run(&cfg, &RoutingPlan::pkg(Estimation::Global), &w, true).unwrap();
        let l = run(&cfg, &RoutingPlan::pkg(Estimation::Local), &w, true).unwrap();
        assert_eq!(g.trace, l.trace);
    }

    #[test]
    fn infinite_probe_period_equals_local() {
        let w = wl("zipf:1.0,1000,20000", 3);
        let cfg = RunConfig::new(10, 4).with_seed(5);
        let l = run(&cfg, &RoutingPlan::pkg(Estimation::Local), &w, true).unwrap();
        let p = run(
            &cfg,
            &RoutingPlan::pkg(Estimation::Probing { period: u64::MAX }),
            &w,
            true,
        )
        .unwrap();
        assert_eq!(l.trace, p.trace);
    }

    #[test]
    fn probing_resets_local_views() {
        let cfg = RunConfig::new(4, 2);
        let mut r = Router::new(
            cfg,
            RoutingPlan::pkg(Estimation::Probing { period: 10 }),
            None,
        )
        .unwrap();
        for t in 0..10u64 {
            r.route(&Message::new(t, t % 3));
        }
        // Probe fires before message 10 is routed.
        r.route(&Message::new(10, 1));
        let src = r.source_for(&Message::new(10, 1));
        let view = r.local_view(src).unwrap().total();
        assert_eq!(view, 11);
        let other = r.local_view(1 - src).unwrap().total();
        assert_eq!(other, 10);
    }

    #[test]
    fn keyed_split_uses_source_key() {
        let cfg = RunConfig::new(4, 5).with_seed(3);
        let r = Router::new(
            cfg,
            RoutingPlan::new(PartitionerKind::Pkg).with_split(SourceSplit::Keyed),
            None,
        )
        .unwrap();
        let a = Message {
            timestamp: 0,
            key: 10,
            source_key: Some(77),
        };
        let b = Message {
            timestamp: 99,
            key: 11,
            source_key: Some(77),
        };
        assert_eq!(r.source_for(&a), r.source_for(&b));
        let c = Message::new(5, 77);
        assert_eq!(r.source_for(&c), r.source_for(&a));
    }

    #[test]
    fn route_from_rejects_bad_source() {
        let mut r = Router::new(
            RunConfig::new(4, 2),
            RoutingPlan::new(PartitionerKind::Pkg),
            None,
        )
        .unwrap();
        assert!(r.route_from(2, 1).is_err());
        assert_eq!(r.processed(), 0);
    }

    #[test]
    fn offgreedy_needs_frequencies() {
        assert!(Router::new(
            RunConfig::new(4, 1),
            RoutingPlan::new(PartitionerKind::OffGreedy),
            None
        )
        .is_err());
    }

    #[test]
    fn compare_examples() {
        let w = wl("zipf:0.5,200,2000", 8);
        let plan = RoutingPlan::new(PartitionerKind::KeyGrouping);
        let a = run(&RunConfig::new(8, 1).with_seed(1), &plan, &w, true).unwrap();
        let b = run(&RunConfig::new(8, 1).with_seed(2), &plan, &w, true).unwrap();
        let m = compare(&[a.clone(), b]).unwrap();
        assert_eq!(m[0][0], 1.0);
        assert_eq!(m[1][1], 1.0);
        assert!(m[0][1] < 1.0);
        assert_eq!(m[0][1], m[1][0]);
        let untraced = run(&RunConfig::new(8, 1), &plan, &w, false).unwrap();
        assert!(compare(&[a, untraced]).is_err());
    }

    #[test]
    fn theory_rejects_small_n() {
        assert!(theory_check(&[4, 16], 2, &[1]).is_err());
        assert!(theory_check(&[], 2, &[1]).is_err());
    }

    #[test]
    fn median_works() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
