//! Pluggable scheduling strategies.
//!
//! A strategy is a pure function from a cluster snapshot to a decision; all
//! mutation happens when the engine applies the decision. Strategies are
//! invoked once per dispatched event, never concurrently.

mod backfill;
mod perf_aware;
mod power_aware;

pub use backfill::Backfill;
pub use perf_aware::{CandidateOrder, PerfAware};
pub use power_aware::PowerAware;

use crate::job::{JobId, JobKind};
use crate::time::SimTime;
use std::collections::BTreeSet;
use thiserror::Error;

/// A pending job as seen by a strategy.
#[derive(Clone, Debug)]
pub struct PendingView {
    pub id: JobId,
    pub kind: JobKind,
    pub nodes_requested: u32,
    pub priority: u32,
    /// Known runtime at the requested size.
    pub runtime_estimate: SimTime,
    pub pmin_per_node: f64,
    pub pmax_per_node: f64,
}

/// A running (or adapting) job as seen by a strategy.
#[derive(Clone, Debug)]
pub struct RunningView {
    pub id: JobId,
    pub kind: JobKind,
    pub priority: u32,
    pub start_time: SimTime,
    pub allocated: BTreeSet<u32>,
    pub launcher: u32,
    pub valid_set: Vec<u32>,
    pub mtct: f64,
    pub power_total: f64,
    pub pmin_per_node: f64,
    pub pmax_per_node: f64,
    pub adapting: bool,
    /// Scheduled completion under the current allocation, if running.
    pub completion_time: Option<SimTime>,
}

/// Immutable snapshot handed to a strategy at each event.
#[derive(Clone, Debug)]
pub struct SchedSnapshot {
    pub now: SimTime,
    pub total_nodes: u32,
    pub idle: BTreeSet<u32>,
    /// Pending jobs, rigid and elastic merged, in priority order.
    pub pending: Vec<PendingView>,
    /// Running and adapting jobs, in priority order.
    pub running: Vec<RunningView>,
    /// Corridor the strategy should steer toward. Before the first corridor
    /// phase activates this is the upcoming phase, so admission control can
    /// already respect it.
    pub corridor: Option<(f64, f64)>,
    pub p_idle: f64,
    /// Total system power right now: running jobs plus idle draw.
    pub system_power: f64,
}

impl SchedSnapshot {
    pub fn any_adapting(&self) -> bool {
        self.running.iter().any(|r| r.adapting)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Launch {
    pub job: JobId,
    pub nodes: BTreeSet<u32>,
}

/// A reallocation request; the engine derives the operation and timing.
#[derive(Clone, Debug, PartialEq)]
pub struct ReallocRequest {
    pub job: JobId,
    pub target: BTreeSet<u32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScheduleDecision {
    pub launches: Vec<Launch>,
    pub reallocations: Vec<ReallocRequest>,
}

impl ScheduleDecision {
    pub fn is_empty(&self) -> bool {
        self.launches.is_empty() && self.reallocations.is_empty()
    }
}

pub trait Strategy {
    fn id(&self) -> &'static str;
    fn decide(&self, snapshot: &SchedSnapshot) -> ScheduleDecision;
}

#[derive(Error, Debug)]
#[error("unknown strategy id '{0}' (known: backfill, fpsma, perf-aware, power-aware, power-aware-running-only)")]
pub struct UnknownStrategy(pub String);

pub const STRATEGY_IDS: &[&str] = &[
    "backfill",
    "fpsma",
    "perf-aware",
    "power-aware",
    "power-aware-running-only",
];

pub fn make_strategy(id: &str) -> Result<Box<dyn Strategy>, UnknownStrategy> {
    match id {
        "backfill" => Ok(Box::new(Backfill)),
        "fpsma" => Ok(Box::new(PerfAware::new(CandidateOrder::StartTime))),
        "perf-aware" => Ok(Box::new(PerfAware::new(CandidateOrder::Mtct))),
        "power-aware" => Ok(Box::new(PowerAware::with_waiting_jobs())),
        "power-aware-running-only" => Ok(Box::new(PowerAware::running_only())),
        other => Err(UnknownStrategy(other.to_string())),
    }
}

/// Claims the `count` lowest-numbered nodes from a working idle pool.
/// Panics if the pool is short; callers check capacity first.
pub(crate) fn take_lowest(pool: &mut BTreeSet<u32>, count: u32) -> BTreeSet<u32> {
    assert!(pool.len() >= count as usize, "idle pool exhausted");
    let taken: BTreeSet<u32> = pool.iter().copied().take(count as usize).collect();
    for n in &taken {
        pool.remove(n);
    }
    taken
}

/// Strict FCFS launch pass: starts pending jobs in priority order at their
/// requested size until the first job that does not fit. Returns the
/// launches and the index of the first unstarted pending job.
pub(crate) fn fcfs_launches(
    snapshot: &SchedSnapshot,
    pool: &mut BTreeSet<u32>,
) -> (Vec<Launch>, usize) {
    let mut launches = Vec::new();
    for (i, job) in snapshot.pending.iter().enumerate() {
        if (pool.len() as u32) < job.nodes_requested {
            return (launches, i);
        }
        let nodes = take_lowest(pool, job.nodes_requested);
        launches.push(Launch { job: job.id, nodes });
    }
    let done = snapshot.pending.len();
    (launches, done)
}
