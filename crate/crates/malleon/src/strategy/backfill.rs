//! EASY backfilling over the combined queue. Never reconfigures anything.

use super::{fcfs_launches, take_lowest, Launch, SchedSnapshot, ScheduleDecision, Strategy};
use crate::time::SimTime;

pub struct Backfill;

impl Strategy for Backfill {
    fn id(&self) -> &'static str {
        "backfill"
    }

    fn decide(&self, snapshot: &SchedSnapshot) -> ScheduleDecision {
        let mut pool = snapshot.idle.clone();
        let (mut launches, head_ix) = fcfs_launches(snapshot, &mut pool);
        if head_ix >= snapshot.pending.len() {
            return ScheduleDecision {
                launches,
                reallocations: Vec::new(),
            };
        }

        // The head job cannot start. Compute its reservation: the earliest
        // time enough nodes free up, given the known completion times of
        // running jobs.
        let head = &snapshot.pending[head_ix];
        let mut completions: Vec<(SimTime, u32)> = snapshot
            .running
            .iter()
            .filter_map(|r| r.completion_time.map(|t| (t, r.allocated.len() as u32)))
            .collect();
        completions.sort();

        let mut avail = pool.len() as u32;
        let mut shadow_time = None;
        for (t, freed) in &completions {
            avail += freed;
            if avail >= head.nodes_requested {
                shadow_time = Some((*t, avail - head.nodes_requested));
                break;
            }
        }
        let Some((shadow_time, mut extra)) = shadow_time else {
            // A job in adaptation has no known completion time; without a
            // reservation no backfilling happens this pass.
            return ScheduleDecision {
                launches,
                reallocations: Vec::new(),
            };
        };

        // Backfill pass: lower-priority jobs may start now only if they fit
        // the idle pool and cannot delay the reservation, either by ending
        // before it or by fitting into the extra (never-reserved) nodes.
        for job in snapshot.pending.iter().skip(head_ix + 1) {
            if job.nodes_requested > pool.len() as u32 {
                continue;
            }
            let ends_before_shadow = snapshot.now + job.runtime_estimate <= shadow_time;
            if ends_before_shadow {
                let nodes = take_lowest(&mut pool, job.nodes_requested);
                launches.push(Launch { job: job.id, nodes });
            } else if job.nodes_requested <= extra {
                extra -= job.nodes_requested;
                let nodes = take_lowest(&mut pool, job.nodes_requested);
                launches.push(Launch { job: job.id, nodes });
            }
        }

        ScheduleDecision {
            launches,
            reallocations: Vec::new(),
        }
    }
}
