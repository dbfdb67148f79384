//! Integer feasibility search for power-corridor reconfiguration.
//!
//! Given running jobs with constrained node counts and optionally one or
//! more waiting jobs, finds an assignment of node counts that keeps total
//! system power (including idle-node power) inside the corridor while
//! minimizing idle power `k_idle * p_idle`. Instances are small (tens of
//! nodes, a handful of jobs), so exact depth-first search with pruning is
//! cheap; a naive full-enumeration oracle is provided for testing.

use crate::job::JobId;
use serde::{Deserialize, Serialize};

/// A running job as seen by the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct LpJob {
    pub id: JobId,
    /// Valid node counts, ascending: min/max bounds intersected with the
    /// node constraint. A rigid job is a singleton set.
    pub sizes: Vec<u32>,
    pub pmin_per_node: f64,
    pub pmax_per_node: f64,
}

/// A waiting job admitted alongside the redistribution; its node count is
/// fixed at the launch size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpWaiting {
    pub id: JobId,
    pub nodes: u32,
    pub pmin_per_node: f64,
    pub pmax_per_node: f64,
}

#[derive(Clone, Debug)]
pub struct LpInstance {
    /// Running jobs in priority order; the order fixes the lexicographic
    /// tie-break of the solver.
    pub running: Vec<LpJob>,
    /// Waiting jobs to start, usually zero or one.
    pub waiting: Vec<LpWaiting>,
    pub total_nodes: u32,
    pub p_idle: f64,
    pub lower: f64,
    pub upper: f64,
}

impl LpInstance {
    pub fn without_waiting(&self) -> LpInstance {
        LpInstance {
            waiting: Vec::new(),
            ..self.clone()
        }
    }

    fn waiting_nodes(&self) -> u32 {
        self.waiting.iter().map(|w| w.nodes).sum()
    }

    fn waiting_pmin(&self) -> f64 {
        self.waiting
            .iter()
            .map(|w| w.nodes as f64 * w.pmin_per_node)
            .sum()
    }

    fn waiting_pmax(&self) -> f64 {
        self.waiting
            .iter()
            .map(|w| w.nodes as f64 * w.pmax_per_node)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    /// Node count per running job, in instance order.
    pub assignment: Vec<u32>,
    pub k_idle: u32,
    /// Idle power `k_idle * p_idle`, the minimized objective.
    pub objective: f64,
}

/// Independent constraint checker; kept free of any solver logic so it can
/// audit solutions from either search routine.
pub fn check_solution(instance: &LpInstance, sol: &LpSolution) -> bool {
    if sol.assignment.len() != instance.running.len() {
        return false;
    }
    let mut used: u64 = instance.waiting_nodes() as u64;
    let mut pmin_sum = instance.waiting_pmin();
    let mut pmax_sum = instance.waiting_pmax();
    for (job, &k) in instance.running.iter().zip(&sol.assignment) {
        if !job.sizes.contains(&k) || k == 0 {
            return false;
        }
        used += k as u64;
        pmin_sum += k as f64 * job.pmin_per_node;
        pmax_sum += k as f64 * job.pmax_per_node;
    }
    let total = instance.total_nodes as u64;
    if used + sol.k_idle as u64 != total {
        return false;
    }
    if sol.k_idle as u64 >= total {
        return false;
    }
    let idle_power = sol.k_idle as f64 * instance.p_idle;
    if pmin_sum + idle_power < instance.lower {
        return false;
    }
    if pmax_sum + idle_power > instance.upper {
        return false;
    }
    (sol.objective - idle_power).abs() < 1e-9
}

fn better(a: &LpSolution, b: &LpSolution) -> bool {
    // smaller k_idle wins; ties go to the lexicographically smallest
    // assignment in priority order
    a.k_idle < b.k_idle || (a.k_idle == b.k_idle && a.assignment < b.assignment)
}

/// Exact search minimizing idle power. Returns `None` when no assignment
/// satisfies the corridor.
pub fn solve(instance: &LpInstance) -> Option<LpSolution> {
    let m = instance.waiting_nodes();
    if m > instance.total_nodes {
        return None;
    }
    let mut best: Option<LpSolution> = None;
    let mut assignment = Vec::with_capacity(instance.running.len());

    // Suffix sums of the smallest possible node counts and pmax
    // contributions, for pruning.
    let n = instance.running.len();
    let mut min_nodes_rest = vec![0u64; n + 1];
    let mut min_pmax_rest = vec![0f64; n + 1];
    for i in (0..n).rev() {
        let job = &instance.running[i];
        let kmin = *job.sizes.first().expect("non-empty size set") as u64;
        min_nodes_rest[i] = min_nodes_rest[i + 1] + kmin;
        min_pmax_rest[i] = min_pmax_rest[i + 1] + kmin as f64 * job.pmax_per_node;
    }

    fn dfs(
        instance: &LpInstance,
        depth: usize,
        used: u64,
        pmin_sum: f64,
        pmax_sum: f64,
        assignment: &mut Vec<u32>,
        min_nodes_rest: &[u64],
        min_pmax_rest: &[f64],
        best: &mut Option<LpSolution>,
    ) {
        let total = instance.total_nodes as u64;
        if used + min_nodes_rest[depth] > total {
            return;
        }
        // even with every remaining job at its smallest size and zero idle
        // power, the max-power constraint cannot recover once exceeded
        if pmax_sum + min_pmax_rest[depth] > instance.upper + 1e-9 {
            return;
        }
        if depth == instance.running.len() {
            let k_idle = (total - used) as u32;
            if k_idle as u64 >= total && total > 0 {
                return; // all nodes idle is outside the model
            }
            let idle_power = k_idle as f64 * instance.p_idle;
            if pmin_sum + idle_power < instance.lower - 1e-9 {
                return;
            }
            if pmax_sum + idle_power > instance.upper + 1e-9 {
                return;
            }
            let candidate = LpSolution {
                assignment: assignment.clone(),
                k_idle,
                objective: idle_power,
            };
            if best.as_ref().map_or(true, |b| better(&candidate, b)) {
                *best = Some(candidate);
            }
            return;
        }
        let job = &instance.running[depth];
        for &k in &job.sizes {
            assignment.push(k);
            dfs(
                instance,
                depth + 1,
                used + k as u64,
                pmin_sum + k as f64 * job.pmin_per_node,
                pmax_sum + k as f64 * job.pmax_per_node,
                assignment,
                min_nodes_rest,
                min_pmax_rest,
                best,
            );
            assignment.pop();
        }
    }

    dfs(
        instance,
        0,
        m as u64,
        instance.waiting_pmin(),
        instance.waiting_pmax(),
        &mut assignment,
        &min_nodes_rest,
        &min_pmax_rest,
        &mut best,
    );
    best
}

/// Redistribution over running jobs only, with the waiting-job terms dropped.
pub fn solve_without_waiting(instance: &LpInstance) -> Option<LpSolution> {
    solve(&instance.without_waiting())
}

/// Naive full enumeration over the cross product of all valid size sets.
/// Testing oracle; shares no search logic with [`solve`].
pub fn enumerate_oracle(instance: &LpInstance) -> Option<LpSolution> {
    let n = instance.running.len();
    let mut indices = vec![0usize; n];
    let mut best: Option<LpSolution> = None;
    loop {
        let assignment: Vec<u32> = indices
            .iter()
            .enumerate()
            .map(|(i, &ix)| instance.running[i].sizes[ix])
            .collect();
        let used: u64 = instance.waiting_nodes() as u64
            + assignment.iter().map(|&k| k as u64).sum::<u64>();
        let total = instance.total_nodes as u64;
        if used <= total {
            let k_idle = (total - used) as u32;
            if (k_idle as u64) < total {
                let idle_power = k_idle as f64 * instance.p_idle;
                let pmin_sum: f64 = instance.waiting_pmin()
                    + instance
                        .running
                        .iter()
                        .zip(&assignment)
                        .map(|(j, &k)| k as f64 * j.pmin_per_node)
                        .sum::<f64>();
                let pmax_sum: f64 = instance.waiting_pmax()
                    + instance
                        .running
                        .iter()
                        .zip(&assignment)
                        .map(|(j, &k)| k as f64 * j.pmax_per_node)
                        .sum::<f64>();
                if pmin_sum + idle_power >= instance.lower - 1e-9
                    && pmax_sum + idle_power <= instance.upper + 1e-9
                {
                    let candidate = LpSolution {
                        assignment,
                        k_idle,
                        objective: idle_power,
                    };
                    if best.as_ref().map_or(true, |b| better(&candidate, b)) {
                        best = Some(candidate);
                    }
                }
            }
        }
        // odometer increment
        let mut d = n;
        loop {
            if d == 0 {
                return best;
            }
            d -= 1;
            indices[d] += 1;
            if indices[d] < instance.running[d].sizes.len() {
                break;
            }
            indices[d] = 0;
        }
    }
}
