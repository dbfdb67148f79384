//! Simulation trace: the complete, replayable record of a run.
//!
//! Traces serialize as line-delimited JSON, one record per line, so they can
//! be streamed, diffed, and re-read to recompute metrics. A trace is a pure
//! function of (config, workload): two runs with identical inputs must
//! produce byte-identical trace files.

use crate::adapt::Reallocation;
use crate::engine::EventKind;
use crate::job::JobId;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct LaunchRecord {
    pub job: JobId,
    pub launcher: u32,
    pub nodes: BTreeSet<u32>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct AllocEntry {
    pub job: JobId,
    pub launcher: u32,
    pub nodes: BTreeSet<u32>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Meta {
        strategy: String,
        seed: u64,
        total_nodes: u32,
        scheduler_tick: SimTime,
        p_idle: f64,
        workload_hash: String,
    },
    /// One dispatched event, in dispatch order.
    Dispatch {
        time: SimTime,
        seq: u64,
        kind: EventKind,
    },
    /// The strategy decision taken in response to the preceding dispatch.
    Decision {
        time: SimTime,
        launches: Vec<LaunchRecord>,
        reallocations: Vec<Reallocation>,
    },
    /// Cluster state after the decision was applied.
    Snapshot {
        time: SimTime,
        allocations: Vec<AllocEntry>,
        adapting: Vec<JobId>,
        power: f64,
        corridor: Option<(f64, f64)>,
    },
    /// Final per-job lifecycle summary.
    Job {
        job: JobId,
        submit: SimTime,
        start: Option<SimTime>,
        end: Option<SimTime>,
        adaptations: u32,
    },
    End {
        time: SimTime,
        complete: bool,
    },
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
}

impl SimTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<SimTrace, serde_json::Error> {
        let mut records = Vec::new();
        for line in s.lines() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line)?);
        }
        Ok(SimTrace { records })
    }

    pub fn meta(&self) -> Option<&TraceRecord> {
        self.records
            .iter()
            .find(|r| matches!(r, TraceRecord::Meta { .. }))
    }

    pub fn is_complete(&self) -> bool {
        self.records
            .iter()
            .any(|r| matches!(r, TraceRecord::End { complete: true, .. }))
    }
}

#[derive(Error, Debug, PartialEq)]
pub enum AuditError {
    #[error("node {node} allocated to both {a} and {b} at {time}")]
    DoubleAllocation {
        time: SimTime,
        node: u32,
        a: JobId,
        b: JobId,
    },
    #[error("node {node} outside cluster at {time}")]
    NodeOutOfRange { time: SimTime, node: u32 },
    #[error("reallocation issued at {time} while {adapting} was adapting")]
    ReallocWhileAdapting { time: SimTime, adapting: JobId },
    #[error("{job}: mixed expand/shrink reallocation at {time}")]
    ImpureReallocation { time: SimTime, job: JobId },
    #[error("{job}: launcher node {launcher} migrated at {time}")]
    LauncherMigrated {
        time: SimTime,
        job: JobId,
        launcher: u32,
    },
}

/// Audits protocol invariants over a full trace: disjoint allocations,
/// no reallocation issued while any job is adapting, purity of every
/// reallocation, and a pinned launcher node.
pub fn audit(trace: &SimTrace) -> Result<(), AuditError> {
    let total_nodes = match trace.meta() {
        Some(TraceRecord::Meta { total_nodes, .. }) => *total_nodes,
        _ => u32::MAX,
    };
    let mut adapting: BTreeSet<JobId> = BTreeSet::new();
    let mut launcher_of: BTreeMap<JobId, u32> = BTreeMap::new();

    for rec in &trace.records {
        match rec {
            TraceRecord::Dispatch { kind, .. } => {
                if let EventKind::AdaptationCompleted { job } = kind {
                    adapting.remove(job);
                }
            }
            TraceRecord::Decision {
                time,
                launches,
                reallocations,
            } => {
                if !reallocations.is_empty() {
                    if let Some(&busy) = adapting.iter().next() {
                        return Err(AuditError::ReallocWhileAdapting {
                            time: *time,
                            adapting: busy,
                        });
                    }
                }
                for l in launches {
                    launcher_of.insert(l.job, l.launcher);
                }
                for r in reallocations {
                    let added = r.to_nodes.difference(&r.from_nodes).count();
                    let removed = r.from_nodes.difference(&r.to_nodes).count();
                    if added > 0 && removed > 0 {
                        return Err(AuditError::ImpureReallocation {
                            time: *time,
                            job: r.job,
                        });
                    }
                    if let Some(&launcher) = launcher_of.get(&r.job) {
                        if !r.from_nodes.contains(&launcher) || !r.to_nodes.contains(&launcher) {
                            return Err(AuditError::LauncherMigrated {
                                time: *time,
                                job: r.job,
                                launcher,
                            });
                        }
                    }
                    adapting.insert(r.job);
                }
            }
            TraceRecord::Snapshot {
                time, allocations, ..
            } => {
                let mut owner: BTreeMap<u32, JobId> = BTreeMap::new();
                for entry in allocations {
                    for &node in &entry.nodes {
                        if node >= total_nodes {
                            return Err(AuditError::NodeOutOfRange { time: *time, node });
                        }
                        if let Some(&other) = owner.get(&node) {
                            return Err(AuditError::DoubleAllocation {
                                time: *time,
                                node,
                                a: other,
                                b: entry.job,
                            });
                        }
                        owner.insert(node, entry.job);
                    }
                }
            }
            _ => {}
        }
    }
    Ok(())
}
