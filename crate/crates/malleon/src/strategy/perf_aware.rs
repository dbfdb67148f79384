//! Performance-aware scheduling of rigid and malleable jobs, with the
//! FPSMA baseline as an ordering variant.
//!
//! Launches are strict FCFS. When the head job cannot start and no job is
//! mid-adaptation, running malleable jobs are shrunk in decreasing order of
//! their MTCT ratios (most communication-bound first) until the head job's
//! node deficit is covered; shrinks commit only when the deficit is fully
//! covered, and the head job starts once they complete. If the deficit
//! cannot be covered, running jobs are instead expanded into the idle pool
//! in increasing MTCT order.

use super::{
    fcfs_launches, take_lowest, ReallocRequest, RunningView, SchedSnapshot, ScheduleDecision,
    Strategy,
};
use crate::job::{expand_target, shrink_target, JobKind};
use std::cmp::Reverse;
use std::collections::BTreeSet;

/// How expand/shrink candidates are ordered.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CandidateOrder {
    /// Shrink highest MTCT first, expand lowest MTCT first.
    Mtct,
    /// Favour previously started: shrink newest start first, expand oldest
    /// start first.
    StartTime,
}

pub struct PerfAware {
    order: CandidateOrder,
}

impl PerfAware {
    pub fn new(order: CandidateOrder) -> Self {
        PerfAware { order }
    }

    fn shrink_candidates<'a>(&self, running: &'a [RunningView]) -> Vec<&'a RunningView> {
        let mut c: Vec<&RunningView> = running
            .iter()
            .filter(|r| r.kind == JobKind::Malleable && !r.adapting)
            .collect();
        match self.order {
            // ties broken by priority (earlier arrival first)
            CandidateOrder::Mtct => {
                c.sort_by(|a, b| b.mtct.total_cmp(&a.mtct).then(a.priority.cmp(&b.priority)))
            }
            CandidateOrder::StartTime => c.sort_by_key(|r| (Reverse(r.start_time), r.priority)),
        }
        c
    }

    fn expand_candidates<'a>(&self, running: &'a [RunningView]) -> Vec<&'a RunningView> {
        let mut c: Vec<&RunningView> = running
            .iter()
            .filter(|r| r.kind == JobKind::Malleable && !r.adapting)
            .collect();
        match self.order {
            CandidateOrder::Mtct => {
                c.sort_by(|a, b| a.mtct.total_cmp(&b.mtct).then(a.priority.cmp(&b.priority)))
            }
            CandidateOrder::StartTime => c.sort_by_key(|r| (r.start_time, r.priority)),
        }
        c
    }
}

/// Shrink `job` to `target` nodes by releasing the highest-numbered
/// non-launcher nodes.
fn shrink_to(job: &RunningView, target: u32) -> BTreeSet<u32> {
    let mut keep: BTreeSet<u32> = BTreeSet::from([job.launcher]);
    for &n in job.allocated.iter() {
        if keep.len() as u32 == target {
            break;
        }
        keep.insert(n);
    }
    keep
}

impl Strategy for PerfAware {
    fn id(&self) -> &'static str {
        match self.order {
            CandidateOrder::Mtct => "perf-aware",
            CandidateOrder::StartTime => "fpsma",
        }
    }

    fn decide(&self, snapshot: &SchedSnapshot) -> ScheduleDecision {
        let mut pool = snapshot.idle.clone();
        let (launches, head_ix) = fcfs_launches(snapshot, &mut pool);
        let mut decision = ScheduleDecision {
            launches,
            reallocations: Vec::new(),
        };
        if head_ix >= snapshot.pending.len() {
            return decision; // everything started; nothing blocked
        }
        // New reconfiguration decisions wait until all adaptations complete.
        if snapshot.any_adapting() {
            return decision;
        }
        let head = &snapshot.pending[head_ix];

        // Mandatory shrink phase: cover the head job's deficit.
        let deficit = head.nodes_requested.saturating_sub(pool.len() as u32);
        debug_assert!(deficit > 0);
        let mut remaining = deficit as i64;
        let mut selected: Vec<(&RunningView, u32)> = Vec::new();
        for cand in self.shrink_candidates(&snapshot.running) {
            if remaining <= 0 {
                break;
            }
            let current = cand.allocated.len() as u32;
            // Next lowest constraint value that covers the remaining
            // deficit, or the candidate's maximum contribution if it cannot
            // cover it alone.
            let target = shrink_target(current, remaining as u32, &cand.valid_set)
                .or_else(|| cand.valid_set.iter().copied().find(|&v| v < current));
            if let Some(t) = target {
                remaining -= (current - t) as i64;
                selected.push((cand, t));
            }
        }

        if remaining <= 0 {
            // Fully covered: commit the shrinks. The head job starts when
            // they complete and the freed nodes go idle. Constraint
            // granularity can overshoot the deficit; the surplus stays
            // available for expansion.
            let shrunk: Vec<&RunningView> = selected.iter().map(|&(c, _)| c).collect();
            for (cand, target) in &selected {
                decision.reallocations.push(ReallocRequest {
                    job: cand.id,
                    target: shrink_to(cand, *target),
                });
            }
            let expand_budget = (-remaining) as u32;
            if expand_budget == 0 {
                return decision;
            }
            // nodes beyond the surplus are earmarked for the head job
            for cand in self.expand_candidates(&snapshot.running) {
                if shrunk.iter().any(|s| s.id == cand.id) {
                    continue;
                }
                let current = cand.allocated.len() as u32;
                let budget = expand_budget.min(pool.len() as u32);
                if let Some(t) = expand_target(current, budget, &cand.valid_set) {
                    let mut target = cand.allocated.clone();
                    target.append(&mut take_lowest(&mut pool, t - current));
                    decision.reallocations.push(ReallocRequest {
                        job: cand.id,
                        target,
                    });
                    break; // surplus spent
                }
            }
            return decision;
        }

        // Insufficient resources: expansion phase over the idle pool.
        for cand in self.expand_candidates(&snapshot.running) {
            let current = cand.allocated.len() as u32;
            if let Some(t) = expand_target(current, pool.len() as u32, &cand.valid_set) {
                let mut target = cand.allocated.clone();
                target.append(&mut take_lowest(&mut pool, t - current));
                decision.reallocations.push(ReallocRequest {
                    job: cand.id,
                    target,
                });
            }
        }
        decision
    }
}
