//! Load views for partial key grouping.
//!
//! The true load on worker `i` is the sum over sources `j` of the load `j`
//! has sent to `i`. A source that balances its own contribution therefore
//! bounds the global maximum by the sum of its local maxima, without any
//! communication with the workers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{LoadVector, WorkerId};

/// How a PKG source learns worker loads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Estimation {
    /// Oracle access to the true loads.
    Global,
    /// Each source counts only what it has sent.
    Local,
    /// Local counting, overwritten with the true loads every `period` messages.
    Probing { period: u64 },
}

impl Estimation {
    pub fn name(&self) -> &'static str {
        match self {
            Estimation::Global => "global",
            Estimation::Local => "local",
            Estimation::Probing { .. } => "probing",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Estimation::Probing { period: 0 } => {
                Err(Error::usage("probe period must be at least 1 message"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Estimation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimation::Probing { period } => write!(f, "probing:{period}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Estimation {
    type Err = Error;

    /// Accepts `global`, `local` and `probing:PERIOD`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" | "g" => Ok(Estimation::Global),
            "local" | "l" => Ok(Estimation::Local),
            _ => {
                let period = s
                    .strip_prefix("probing:")
                    .and_then(|p| p.parse::<u64>().ok())
                    .ok_or_else(|| Error::usage(format!("unknown estimation '{s}'")))?;
                let e = Estimation::Probing { period };
                e.validate()?;
                Ok(e)
            }
        }
    }
}

pub trait LoadEstimator {
    fn view(&self) -> &LoadVector;

    /// Accounts one message routed to `worker`.
    fn on_route(&mut self, worker: WorkerId) -> Result<()>;
}

/// True worker loads, updated for every message from every source.
#[derive(Clone, Debug)]
pub struct GlobalOracle {
    loads: LoadVector,
}

impl GlobalOracle {
    pub fn new(workers: usize) -> Self {
        GlobalOracle {
            loads: LoadVector::zeros(workers),
        }
    }
}

impl LoadEstimator for GlobalOracle {
    fn view(&self) -> &LoadVector {
        &self.loads
    }

    fn on_route(&mut self, worker: WorkerId) -> Result<()> {
        self.loads.record_route(worker)
    }
}

/// Load one source has itself generated on each worker.
#[derive(Clone, Debug)]
pub struct LocalEstimator {
    source: usize,
    loads: LoadVector,
}

impl LocalEstimator {
    pub fn new(source: usize, workers: usize) -> Self {
        LocalEstimator {
            source,
            loads: LoadVector::zeros(workers),
        }
    }

    pub fn source(&self) -> usize {
        self.source
    }
}

impl LoadEstimator for LocalEstimator {
    fn view(&self) -> &LoadVector {
        &self.loads
    }

    fn on_route(&mut self, worker: WorkerId) -> Result<()> {
        self.loads.record_route(worker)
    }
}

/// Local estimator whose vector is reset to the true loads on each probe.
#[derive(Clone, Debug)]
pub struct ProbingEstimator {
    local: LocalEstimator,
    period: u64,
    last_probe: u64,
}

impl ProbingEstimator {
    pub fn new(source: usize, workers: usize, period: u64) -> Self {
        ProbingEstimator {
            local: LocalEstimator::new(source, workers),
            period,
            last_probe: 0,
        }
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn last_probe(&self) -> u64 {
        self.last_probe
    }

    pub fn is_due(&self, now: u64) -> bool {
        now.saturating_sub(self.last_probe) >= self.period
    }

    /// Overwrites the local vector with `true_loads` if a full period has
    /// elapsed since the previous probe; otherwise does nothing. Returns
    /// whether the probe happened.
    pub fn probe(&mut self, true_loads: &LoadVector, now: u64) -> bool {
        if !self.is_due(now) {
            return false;
        }
        self.local.loads.assign(true_loads);
        self.last_probe = now;
        true
    }
}

impl LoadEstimator for ProbingEstimator {
    fn view(&self) -> &LoadVector {
        self.local.view()
    }

    fn on_route(&mut self, worker: WorkerId) -> Result<()> {
        self.local.on_route(worker)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_local_is_zero() {
        let e = LocalEstimator::new(0, 4);
        assert_eq!(e.view().counts(), &[0, 0, 0, 0]);
        assert_eq!(e.source(), 0);
    }

    #[test]
    fn oracle_counts_all_routes() {
        let mut g = GlobalOracle::new(2);
        for w in [0, 0, 1] {
            g.on_route(w).unwrap();
        }
        assert_eq!(g.view().counts(), &[2, 1]);
        assert!(g.on_route(2).is_err());
    }

    #[test]
    fn local_views_sum_to_oracle() {
        let w = 4;
        let mut g = GlobalOracle::new(w);
        let mut locals = [LocalEstimator::new(0, w), LocalEstimator::new(1, w)];
        for i in 0..20usize {
            let src = i % 2;
            let worker = (i * 7 + src) % w;
            locals[src].on_route(worker).unwrap();
            g.on_route(worker).unwrap();
        }
        for i in 0..w {
            let sum: u64 = locals.iter().map(|l| l.view().get(i)).sum();
            assert_eq!(sum, g.view().get(i));
        }
        assert_eq!(locals[0].view().total(), 10);
    }

    #[test]
    fn local_route_example() {
        let mut e = LocalEstimator::new(3, 2);
        e.on_route(1).unwrap();
        assert_eq!(e.view().counts(), &[0, 1]);
        assert!(e.on_route(5).is_err());
    }

    #[test]
    fn probing_behaves_locally_between_probes() {
        let mut p = ProbingEstimator::new(0, 3, 100);
        let mut l = LocalEstimator::new(0, 3);
        for i in 0..50 {
            p.on_route(i % 3).unwrap();
            l.on_route(i % 3).unwrap();
            assert_eq!(p.view(), l.view());
        }
    }

    #[test]
    fn probe_overwrites_with_true_loads() {
        let mut p = ProbingEstimator::new(0, 2, 10);
        for _ in 0..5 {
            p.on_route(0).unwrap();
        }
        let truth = LoadVector::from_counts(vec![50, 48]);
        assert!(!p.probe(&truth, 9));
        assert_eq!(p.view().counts(), &[5, 0]);
        assert!(p.probe(&truth, 10));
        assert_eq!(p.view().counts(), &[50, 48]);
        assert_eq!(p.last_probe(), 10);
        assert!(!p.probe(&truth, 19));
        assert!(p.is_due(20));
    }

    #[test]
    fn infinite_period_never_probes() {
        let mut p = ProbingEstimator::new(0, 2, u64::MAX);
        let truth = LoadVector::from_counts(vec![9, 9]);
        for now in [1, 1_000, u64::MAX - 1] {
            assert!(!p.probe(&truth, now));
        }
        assert_eq!(p.view().counts(), &[0, 0]);
    }

    #[test]
    fn parse_estimation() {
        assert_eq!("global".parse::<Estimation>().unwrap(), Estimation::Global);
        assert_eq!("local".parse::<Estimation>().unwrap(), Estimation::Local);
        assert_eq!(
            "probing:25".parse::<Estimation>().unwrap(),
            Estimation::Probing { period: 25 }
        );
        assert!("probing:0".parse::<Estimation>().is_err());
        assert!("psychic".parse::<Estimation>().is_err());
    }
}
