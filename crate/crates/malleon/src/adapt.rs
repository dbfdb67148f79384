//! Expand/shrink reallocation protocol.
//!
//! A reallocation is a timed state machine: the job enters `Adapting` at
//! issue time, holds the union of old and new nodes for the duration of the
//! latency window, and returns to `Running` at completion. Nodes being
//! released stay owned until completion; nodes being added are claimed at
//! issue so no other job can take them mid-window.

use crate::job::JobId;
use crate::time::SimTime;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptOp {
    Expand,
    Shrink,
}

/// One committed reallocation, as recorded in the trace.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Reallocation {
    pub job: JobId,
    pub op: AdaptOp,
    pub from_nodes: BTreeSet<u32>,
    pub to_nodes: BTreeSet<u32>,
    pub issue_time: SimTime,
    pub complete_time: SimTime,
}

#[derive(Error, Debug, PartialEq)]
pub enum ProtocolError {
    #[error("{job}: mixed add/remove set is not a pure expand or shrink")]
    MixedOperation { job: JobId },
    #[error("{job}: target equals current allocation")]
    NoChange { job: JobId },
    #[error("{job}: launcher node {node} cannot be migrated")]
    LauncherRemoved { job: JobId, node: u32 },
    #[error("{job}: target size {size} not in the job's valid node set")]
    InvalidSize { job: JobId, size: u32 },
}

/// Classifies a requested transition, enforcing purity and the pinned
/// launcher node.
pub fn classify(
    job: JobId,
    launcher: u32,
    from: &BTreeSet<u32>,
    to: &BTreeSet<u32>,
    valid_set: &[u32],
) -> Result<AdaptOp, ProtocolError> {
    if !to.contains(&launcher) {
        return Err(ProtocolError::LauncherRemoved { job, node: launcher });
    }
    if !valid_set.contains(&(to.len() as u32)) {
        return Err(ProtocolError::InvalidSize {
            job,
            size: to.len() as u32,
        });
    }
    let added = to.difference(from).count();
    let removed = from.difference(to).count();
    match (added, removed) {
        (0, 0) => Err(ProtocolError::NoChange { job }),
        (_, 0) => Ok(AdaptOp::Expand),
        (0, _) => Ok(AdaptOp::Shrink),
        _ => Err(ProtocolError::MixedOperation { job }),
    }
}

const LATENCY_FLOOR_S: f64 = 0.2;
const EXPAND_MAX_S: f64 = 3.1;
const SHRINK_MAX_S: f64 = 1.8;

/// Adaptation window length for a reallocation landing on `n_target` nodes.
/// Linear in the target node count, anchored at the measured 32-node maxima
/// of 3.1 s (expand) and 1.8 s (shrink), with a 0.2 s floor.
pub fn latency(op: AdaptOp, n_target: u32) -> SimTime {
    let max = match op {
        AdaptOp::Expand => EXPAND_MAX_S,
        AdaptOp::Shrink => SHRINK_MAX_S,
    };
    let frac = (n_target.saturating_sub(1)) as f64 / 31.0;
    let secs = (LATENCY_FLOOR_S + (max - LATENCY_FLOOR_S) * frac).max(LATENCY_FLOOR_S);
    SimTime::from_secs_f64(secs)
}
