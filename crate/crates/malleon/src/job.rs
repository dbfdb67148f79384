//! Job lifecycle, pending queues, and node-constraint arithmetic.
//!
//! Every reconfiguration decision goes through [`valid_node_set`],
//! [`shrink_target`] and [`expand_target`], so the constraint rules live
//! here and nowhere else.

use crate::adapt::Reallocation;
use crate::perf::PerfModelSpec;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// Unique job identifier. Also the job's position in the submission order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "job-{}", self.0)
    }
}

impl fmt::Debug for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JobId({})", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Rigid,
    Malleable,
}

/// Restriction on allowable allocation sizes.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeConstraint {
    Pof2,
    Even,
    Odd,
    Ncube,
    #[default]
    None,
}

impl NodeConstraint {
    pub fn admits(self, n: u32) -> bool {
        match self {
            NodeConstraint::Pof2 => n.is_power_of_two(),
            NodeConstraint::Even => n % 2 == 0,
            NodeConstraint::Odd => n % 2 == 1,
            NodeConstraint::Ncube => {
                let c = (n as f64).cbrt().round() as u32;
                c >= 1 && c * c * c == n
            }
            NodeConstraint::None => true,
        }
    }
}

impl fmt::Display for NodeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeConstraint::Pof2 => "pof2",
            NodeConstraint::Even => "even",
            NodeConstraint::Odd => "odd",
            NodeConstraint::Ncube => "ncube",
            NodeConstraint::None => "none",
        };
        f.write_str(s)
    }
}

/// All node counts in `[min, max]` admitted by the constraint, ascending.
pub fn valid_node_set(constraint: NodeConstraint, min: u32, max: u32) -> Vec<u32> {
    (min..=max).filter(|&n| constraint.admits(n)).collect()
}

/// Largest valid size `v <= current - needed`, i.e. the next lowest
/// constraint value that frees at least `needed` nodes. `None` when the job
/// cannot contribute enough nodes.
pub fn shrink_target(current: u32, needed: u32, valid_set: &[u32]) -> Option<u32> {
    if needed > current {
        return None;
    }
    let cap = current - needed;
    valid_set.iter().copied().filter(|&v| v <= cap).max()
}

/// Largest valid size strictly above `current` whose increment fits in the
/// idle pool. `None` when no larger valid size is reachable.
pub fn expand_target(current: u32, idle: u32, valid_set: &[u32]) -> Option<u32> {
    valid_set
        .iter()
        .copied()
        .filter(|&v| v > current && v - current <= idle)
        .max()
}

/// A job as described in the workload file.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub id: JobId,
    /// The `--nodes` value: launch size for malleable jobs, fixed size for rigid.
    pub nodes: u32,
    #[serde(default)]
    pub min_nodes: Option<u32>,
    #[serde(default)]
    pub max_nodes: Option<u32>,
    #[serde(default)]
    pub constraint: NodeConstraint,
    pub pmin_per_node: f64,
    pub pmax_per_node: f64,
    pub submit_time: SimTime,
    /// Runtime when executed at exactly `nodes` nodes.
    pub static_exec_time: SimTime,
    pub perf: PerfModelSpec,
}

impl JobSpec {
    pub fn kind(&self) -> JobKind {
        if self.min_nodes.is_some() && self.max_nodes.is_some() {
            JobKind::Malleable
        } else {
            JobKind::Rigid
        }
    }

    /// Valid allocation sizes. For rigid jobs this is the singleton `{nodes}`.
    pub fn valid_set(&self) -> Vec<u32> {
        match self.kind() {
            JobKind::Rigid => vec![self.nodes],
            JobKind::Malleable => valid_node_set(
                self.constraint,
                self.min_nodes.unwrap(),
                self.max_nodes.unwrap(),
            ),
        }
    }

    /// Submission-time validation. Fails fast on misconfiguration instead of
    /// coercing the job into some schedulable shape.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes == 0 {
            return Err("nodes must be >= 1".into());
        }
        if self.pmin_per_node > self.pmax_per_node {
            return Err(format!(
                "pmin_per_node {} > pmax_per_node {}",
                self.pmin_per_node, self.pmax_per_node
            ));
        }
        if self.pmin_per_node < 0.0 {
            return Err("negative per-node power".into());
        }
        match (self.min_nodes, self.max_nodes) {
            (None, None) => Ok(()),
            (Some(min), Some(max)) => {
                if min == 0 {
                    return Err("min_nodes must be >= 1".into());
                }
                if min > max {
                    return Err(format!("min_nodes {} > max_nodes {}", min, max));
                }
                let set = valid_node_set(self.constraint, min, max);
                if set.is_empty() {
                    return Err(format!(
                        "constraint {} admits no size in [{}, {}]",
                        self.constraint, min, max
                    ));
                }
                if self.nodes < min || self.nodes > max || !set.contains(&self.nodes) {
                    return Err(format!(
                        "nodes {} outside the valid set of constraint {} over [{}, {}]",
                        self.nodes, self.constraint, min, max
                    ));
                }
                Ok(())
            }
            _ => Err("min_nodes and max_nodes must be given together".into()),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum JobState {
    Pending,
    Running,
    Adapting,
    Completed,
}

/// Runtime state of one job inside the simulation.
#[derive(Clone)]
pub struct Job {
    pub spec: JobSpec,
    pub kind: JobKind,
    pub valid_set: Vec<u32>,
    pub state: JobState,
    /// Arrival rank, 1-based. Lower is higher priority.
    pub priority: u32,
    /// Nodes currently owned, including nodes held mid-adaptation.
    pub allocated: BTreeSet<u32>,
    /// First-allocated node; hosts the launcher and cannot be migrated.
    pub launcher: Option<u32>,
    /// Effective work to deliver, in node-seconds.
    pub work_total: f64,
    pub work_done: f64,
    pub last_progress: SimTime,
    pub start_time: Option<SimTime>,
    pub end_time: Option<SimTime>,
    /// Invalidates stale completion events after a reallocation.
    pub completion_gen: u64,
    /// Completion event currently scheduled, when running.
    pub scheduled_completion: Option<SimTime>,
    /// In-flight reallocation while adapting.
    pub pending_realloc: Option<Reallocation>,
    pub adaptation_count: u32,
}

impl Job {
    pub fn new(spec: JobSpec, priority: u32) -> Job {
        let kind = spec.kind();
        let valid_set = spec.valid_set();
        Job {
            spec,
            kind,
            valid_set,
            state: JobState::Pending,
            priority,
            allocated: BTreeSet::new(),
            launcher: None,
            work_total: 0.0,
            work_done: 0.0,
            last_progress: SimTime::ZERO,
            start_time: None,
            end_time: None,
            completion_gen: 0,
            scheduled_completion: None,
            pending_realloc: None,
            adaptation_count: 0,
        }
    }

    pub fn id(&self) -> JobId {
        self.spec.id
    }

    pub fn allocated_count(&self) -> u32 {
        self.allocated.len() as u32
    }
}

/// Pending jobs split into the two priority-ordered queues.
#[derive(Default, Clone)]
pub struct JobQueues {
    pub rigid: Vec<JobId>,
    pub elastic: Vec<JobId>,
}

impl JobQueues {
    /// Enqueue by kind, keeping arrival-order priority. Jobs arrive in
    /// priority order, so a push preserves the invariant.
    pub fn enqueue(&mut self, id: JobId, kind: JobKind) {
        match kind {
            JobKind::Rigid => self.rigid.push(id),
            JobKind::Malleable => self.elastic.push(id),
        }
    }

    pub fn remove(&mut self, id: JobId) {
        self.rigid.retain(|&j| j != id);
        self.elastic.retain(|&j| j != id);
    }

    pub fn is_empty(&self) -> bool {
        self.rigid.is_empty() && self.elastic.is_empty()
    }
}
