//! Partial key grouping: stream partitioning by the power of two choices
//! with key splitting and local load estimation, next to key grouping,
//! shuffle grouping and greedy baselines, plus a deterministic simulator
//! for measuring worker load imbalance.

pub mod error;
pub mod estimation;
pub mod hashing;
pub mod model;
pub mod partition;
pub mod report;
pub mod sim;
pub mod wordcount;
pub mod workload;

pub use error::{Error, Result};
pub use estimation::Estimation;
pub use hashing::HashFamily;
pub use model::{
    agreement_fraction, imbalance, record_route, ImbalanceSample, KeyId, LoadVector, Message,
    RoutingTrace, RunConfig, WorkerId,
};
pub use partition::{PartitionerKind, RoutingTable};
pub use sim::{run, RoutingPlan, RunResult, SourceSplit};
pub use workload::{Workload, WorkloadSpec};
