//! Power-aware scheduling with dynamic corridor management.
//!
//! While total system power sits inside the corridor, waiting jobs are
//! admitted in priority order as long as their worst-case (pmax) projection
//! keeps the upper bound intact. When the corridor is broken, the integer
//! feasibility model finds a new node distribution over the running jobs,
//! optionally together with one waiting job, and the resulting expand and
//! shrink operations are issued.

use super::{
    take_lowest, Launch, ReallocRequest, RunningView, SchedSnapshot, ScheduleDecision, Strategy,
};
use crate::job::JobKind;
use crate::power_lp::{solve, LpInstance, LpJob, LpSolution, LpWaiting};
use std::collections::BTreeSet;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Raise,
    Lower,
    Any,
}

pub struct PowerAware {
    use_waiting_jobs: bool,
}

impl PowerAware {
    /// Corridor repair may admit a waiting job into the redistribution.
    pub fn with_waiting_jobs() -> Self {
        PowerAware {
            use_waiting_jobs: true,
        }
    }

    /// Corridor repair considers running jobs only.
    pub fn running_only() -> Self {
        PowerAware {
            use_waiting_jobs: false,
        }
    }

    /// Builds the solver's view of the running jobs. `direction` restricts
    /// each size set to the side of the current allocation that moves power
    /// the right way (no shrinks while raising power, no expansions while
    /// lowering it); a configuration found under this restriction is always
    /// realizable from the current allocation and idle pool alone, so the
    /// corridor is reestablished within the same decision.
    fn lp_base(&self, snapshot: &SchedSnapshot, direction: Direction) -> Vec<LpJob> {
        snapshot
            .running
            .iter()
            .map(|r| {
                let current = r.allocated.len() as u32;
                // rigid jobs participate with their fixed size
                let mut sizes = if r.kind == JobKind::Malleable {
                    r.valid_set.clone()
                } else {
                    vec![current]
                };
                match direction {
                    Direction::Raise => sizes.retain(|&k| k >= current),
                    Direction::Lower => sizes.retain(|&k| k <= current),
                    Direction::Any => {}
                }
                if sizes.is_empty() {
                    sizes.push(current);
                }
                LpJob {
                    id: r.id,
                    sizes,
                    pmin_per_node: r.pmin_per_node,
                    pmax_per_node: r.pmax_per_node,
                }
            })
            .collect()
    }

    /// Turns an LP assignment into reallocation requests and, when the
    /// instance carried a waiting job, its launch. The launch claims idle
    /// nodes first (the admitted job must start), then expansions take what
    /// remains; shrinks never need idle nodes. Under a direction-restricted
    /// instance everything fits; otherwise an unclaimable expansion is
    /// dropped and recomputed at a later event, once the shrinks have
    /// released their nodes.
    fn apply_solution(
        &self,
        snapshot: &SchedSnapshot,
        running: &[RunningView],
        solution: &LpSolution,
        waiting: Option<&LpWaiting>,
    ) -> ScheduleDecision {
        let mut pool = snapshot.idle.clone();
        let mut decision = ScheduleDecision::default();
        if let Some(w) = waiting {
            if w.nodes as usize <= pool.len() {
                decision.launches.push(Launch {
                    job: w.id,
                    nodes: take_lowest(&mut pool, w.nodes),
                });
            }
        }
        for (view, &k) in running.iter().zip(&solution.assignment) {
            let current = view.allocated.len() as u32;
            if k < current {
                let mut keep: BTreeSet<u32> = BTreeSet::from([view.launcher]);
                for &n in view.allocated.iter() {
                    if keep.len() as u32 == k {
                        break;
                    }
                    keep.insert(n);
                }
                decision.reallocations.push(ReallocRequest {
                    job: view.id,
                    target: keep,
                });
            } else if k > current && (k - current) as usize <= pool.len() {
                let mut target = view.allocated.clone();
                target.append(&mut take_lowest(&mut pool, k - current));
                decision.reallocations.push(ReallocRequest {
                    job: view.id,
                    target,
                });
            }
        }
        decision
    }

    /// Priority-order admission of waiting jobs whose worst-case power
    /// projection keeps the corridor's upper bound.
    fn admit(&self, snapshot: &SchedSnapshot, power: f64, upper: f64) -> ScheduleDecision {
        let mut pool = snapshot.idle.clone();
        let mut projected = power;
        let mut decision = ScheduleDecision::default();
        for job in &snapshot.pending {
            if job.nodes_requested as usize > pool.len() {
                continue;
            }
            let delta = job.nodes_requested as f64 * (job.pmax_per_node - snapshot.p_idle);
            if projected + delta > upper {
                continue;
            }
            projected += delta;
            decision.launches.push(Launch {
                job: job.id,
                nodes: take_lowest(&mut pool, job.nodes_requested),
            });
        }
        decision
    }
}

impl Strategy for PowerAware {
    fn id(&self) -> &'static str {
        if self.use_waiting_jobs {
            "power-aware"
        } else {
            "power-aware-running-only"
        }
    }

    fn decide(&self, snapshot: &SchedSnapshot) -> ScheduleDecision {
        // Consistency gate: no decisions of any kind mid-adaptation.
        if snapshot.any_adapting() {
            return ScheduleDecision::default();
        }
        let Some((lower, upper)) = snapshot.corridor else {
            // No corridor in this scenario: plain FCFS admission.
            let mut pool = snapshot.idle.clone();
            let (launches, _) = super::fcfs_launches(snapshot, &mut pool);
            return ScheduleDecision {
                launches,
                reallocations: Vec::new(),
            };
        };

        let power = snapshot.system_power;
        if power < lower || power > upper {
            let preferred = if power < lower {
                Direction::Raise
            } else {
                Direction::Lower
            };
            // Direction-restricted instances first (instantly realizable),
            // then the unrestricted sets as a last resort.
            for direction in [preferred, Direction::Any] {
                let base = self.lp_base(snapshot, direction);
                if self.use_waiting_jobs {
                    for job in &snapshot.pending {
                        let waiting = LpWaiting {
                            id: job.id,
                            nodes: job.nodes_requested,
                            pmin_per_node: job.pmin_per_node,
                            pmax_per_node: job.pmax_per_node,
                        };
                        let instance = LpInstance {
                            running: base.clone(),
                            waiting: vec![waiting],
                            total_nodes: snapshot.total_nodes,
                            p_idle: snapshot.p_idle,
                            lower,
                            upper,
                        };
                        if let Some(sol) = solve(&instance) {
                            return self.apply_solution(
                                snapshot,
                                &snapshot.running,
                                &sol,
                                Some(&waiting),
                            );
                        }
                    }
                }
                // Running jobs only, either as the configured mode or as the
                // fallback when no waiting job yields a feasible configuration.
                let instance = LpInstance {
                    running: base,
                    waiting: vec![],
                    total_nodes: snapshot.total_nodes,
                    p_idle: snapshot.p_idle,
                    lower,
                    upper,
                };
                if let Some(sol) = solve(&instance) {
                    return self.apply_solution(snapshot, &snapshot.running, &sol, None);
                }
            }
            if power < lower {
                // No feasible redistribution can raise enough power, but
                // ordinary admissions move toward the corridor (and would be
                // granted anyway once inside it).
                return self.admit(snapshot, power, upper);
            }
            // Above the corridor and no redistribution found; the violation
            // persists until jobs complete.
            return ScheduleDecision::default();
        }

        // Corridor intact: greedily admit waiting jobs whose worst-case
        // power projection keeps the upper bound.
        self.admit(snapshot, power, upper)
    }
}
