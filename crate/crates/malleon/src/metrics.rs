//! Metric computation over simulation traces.
//!
//! Makespan is the span from the first job's arrival to the last job's end.
//! Utilization is integrated allocated-node time over the makespan window,
//! computed by two independent routes (cluster snapshots vs per-job
//! allocation histories) that must agree. Corridor violations are counted
//! per maximal contiguous excursion outside the active corridor, split by
//! corridor changes.

use crate::adapt::AdaptOp;
use crate::job::JobId;
use crate::time::SimTime;
use crate::trace::{SimTrace, TraceRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub time: SimTime,
    pub watts: f64,
    pub corridor: Option<(f64, f64)>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PerJobMetrics {
    pub job: JobId,
    pub waiting_s: f64,
    pub response_s: f64,
    pub adaptations: u32,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: String,
    pub seed: u64,
    pub workload_hash: String,
    /// False when the run hit a time limit with jobs unfinished; metrics
    /// then cover completed jobs only.
    pub complete: bool,
    pub makespan_s: f64,
    pub avg_utilization: f64,
    pub avg_response_s: f64,
    pub avg_waiting_s: f64,
    pub corridor_violations: u32,
    pub per_job: Vec<PerJobMetrics>,
    pub power_timeline: Vec<TimelinePoint>,
}

#[derive(Error, Debug)]
pub enum MetricsError {
    #[error("trace has no meta record")]
    MissingMeta,
    #[error("trace has no job records")]
    NoJobs,
    #[error("utilization routes disagree: {snapshots} vs {per_job}")]
    UtilizationMismatch { snapshots: f64, per_job: f64 },
}

/// One violation per maximal contiguous interval outside the active
/// corridor; intervals are split by corridor changes, and samples with no
/// active corridor never count.
pub fn count_corridor_violations(timeline: &[TimelinePoint]) -> u32 {
    let mut count = 0;
    let mut in_excursion = false;
    let mut prev_corridor: Option<(f64, f64)> = None;
    for p in timeline {
        if p.corridor != prev_corridor {
            // corridor change closes any open excursion
            in_excursion = false;
            prev_corridor = p.corridor;
        }
        match p.corridor {
            Some((lo, hi)) if p.watts < lo || p.watts > hi => {
                if !in_excursion {
                    count += 1;
                    in_excursion = true;
                }
            }
            _ => in_excursion = false,
        }
    }
    count
}

struct JobLifecycle {
    submit: SimTime,
    start: Option<SimTime>,
    end: Option<SimTime>,
    adaptations: u32,
}

/// Integral of allocated-node count over the window, from cluster
/// snapshots (piecewise constant between events).
fn allocated_integral_from_snapshots(
    trace: &SimTrace,
    window_start: SimTime,
    window_end: SimTime,
) -> f64 {
    // last snapshot per timestamp wins
    let mut steps: BTreeMap<SimTime, u32> = BTreeMap::new();
    for rec in &trace.records {
        if let TraceRecord::Snapshot {
            time, allocations, ..
        } = rec
        {
            let count = allocations.iter().map(|a| a.nodes.len() as u32).sum();
            steps.insert(*time, count);
        }
    }
    let mut integral = 0.0;
    let mut current = 0u32;
    let mut cursor = window_start;
    for (&t, &count) in &steps {
        let t = t.max(window_start).min(window_end);
        if t > cursor {
            integral += (t - cursor).as_secs_f64() * current as f64;
            cursor = t;
        }
        current = count;
    }
    if window_end > cursor {
        integral += (window_end - cursor).as_secs_f64() * current as f64;
    }
    integral
}

/// Same integral from per-job allocation histories: launch size, then the
/// owned node count through each reallocation (expansions own the target
/// from issue, shrinks own the source until completion).
fn allocated_integral_from_jobs(trace: &SimTrace, lifecycles: &BTreeMap<JobId, JobLifecycle>) -> f64 {
    // per-job list of (time, owned count) change points
    let mut changes: BTreeMap<JobId, Vec<(SimTime, u32)>> = BTreeMap::new();
    for rec in &trace.records {
        if let TraceRecord::Decision {
            launches,
            reallocations,
            ..
        } = rec
        {
            for l in launches {
                changes
                    .entry(l.job)
                    .or_default()
                    .push((SimTime::ZERO, l.nodes.len() as u32));
            }
            for r in reallocations {
                let entry = changes.entry(r.job).or_default();
                match r.op {
                    AdaptOp::Expand => entry.push((r.issue_time, r.to_nodes.len() as u32)),
                    AdaptOp::Shrink => entry.push((r.complete_time, r.to_nodes.len() as u32)),
                }
            }
        }
    }
    let mut total = 0.0;
    for (job, life) in lifecycles {
        let (Some(start), Some(end)) = (life.start, life.end) else {
            continue;
        };
        let Some(points) = changes.get(job) else {
            continue;
        };
        let mut cursor = start;
        let mut current = points[0].1; // launch size
        for &(t, count) in points.iter().skip(1) {
            let t = t.min(end);
            if t > cursor {
                total += (t - cursor).as_secs_f64() * current as f64;
                cursor = t;
            }
            current = count;
        }
        if end > cursor {
            total += (end - cursor).as_secs_f64() * current as f64;
        }
    }
    total
}

pub fn compute(trace: &SimTrace) -> Result<MetricsReport, MetricsError> {
    let (strategy, seed, total_nodes, workload_hash) = match trace.meta() {
        Some(TraceRecord::Meta {
            strategy,
            seed,
            total_nodes,
            workload_hash,
            ..
        }) => (strategy.clone(), *seed, *total_nodes, workload_hash.clone()),
        _ => return Err(MetricsError::MissingMeta),
    };

    let mut lifecycles: BTreeMap<JobId, JobLifecycle> = BTreeMap::new();
    let mut timeline = Vec::new();
    for rec in &trace.records {
        match rec {
            TraceRecord::Job {
                job,
                submit,
                start,
                end,
                adaptations,
            } => {
                lifecycles.insert(
                    *job,
                    JobLifecycle {
                        submit: *submit,
                        start: *start,
                        end: *end,
                        adaptations: *adaptations,
                    },
                );
            }
            TraceRecord::Snapshot {
                time,
                power,
                corridor,
                ..
            } => timeline.push(TimelinePoint {
                time: *time,
                watts: *power,
                corridor: *corridor,
            }),
            _ => {}
        }
    }
    if lifecycles.is_empty() {
        return Err(MetricsError::NoJobs);
    }

    let complete = trace.is_complete() && lifecycles.values().all(|l| l.end.is_some());
    let first_submit = lifecycles.values().map(|l| l.submit).min().unwrap();
    let last_end = lifecycles.values().filter_map(|l| l.end).max();
    let window_end = last_end.unwrap_or_else(|| {
        timeline
            .last()
            .map(|p| p.time)
            .unwrap_or(first_submit)
    });
    let makespan_s = (window_end - first_submit).as_secs_f64();

    let mut per_job = Vec::new();
    let mut wait_sum = 0.0;
    let mut resp_sum = 0.0;
    let mut finished = 0u32;
    for (job, life) in &lifecycles {
        if let (Some(start), Some(end)) = (life.start, life.end) {
            let waiting_s = (start - life.submit).as_secs_f64();
            let response_s = (end - life.submit).as_secs_f64();
            wait_sum += waiting_s;
            resp_sum += response_s;
            finished += 1;
            per_job.push(PerJobMetrics {
                job: *job,
                waiting_s,
                response_s,
                adaptations: life.adaptations,
            });
        }
    }

    let integral_a = allocated_integral_from_snapshots(trace, first_submit, window_end);
    let integral_b = allocated_integral_from_jobs(trace, &lifecycles);
    let denom = total_nodes as f64 * makespan_s;
    let (util_a, util_b) = if denom > 0.0 {
        (integral_a / denom, integral_b / denom)
    } else {
        (0.0, 0.0)
    };
    if complete {
        let rel = (util_a - util_b).abs() / util_a.abs().max(1e-12);
        if rel > 1e-9 {
            return Err(MetricsError::UtilizationMismatch {
                snapshots: util_a,
                per_job: util_b,
            });
        }
    }

    Ok(MetricsReport {
        strategy,
        seed,
        workload_hash,
        complete,
        makespan_s,
        avg_utilization: util_a,
        avg_response_s: if finished > 0 {
            resp_sum / finished as f64
        } else {
            0.0
        },
        avg_waiting_s: if finished > 0 {
            wait_sum / finished as f64
        } else {
            0.0
        },
        // Corridor management is judged over the half-open execution
        // window: at the instant the last job exits the system is empty
        // and no strategy could hold the corridor.
        corridor_violations: {
            let active: Vec<TimelinePoint> = timeline
                .iter()
                .copied()
                .filter(|p| !complete || p.time < window_end)
                .collect();
            count_corridor_violations(&active)
        },
        per_job,
        power_timeline: timeline,
    })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<MetricsReport, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Human-readable summary table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("strategy            {}\n", self.strategy));
        out.push_str(&format!("seed                {}\n", self.seed));
        out.push_str(&format!("complete            {}\n", self.complete));
        out.push_str(&format!("makespan            {:.3} s\n", self.makespan_s));
        out.push_str(&format!("avg utilization     {:.4}\n", self.avg_utilization));
        out.push_str(&format!("avg response time   {:.3} s\n", self.avg_response_s));
        out.push_str(&format!("avg waiting time    {:.3} s\n", self.avg_waiting_s));
        out.push_str(&format!(
            "corridor violations {}\n",
            self.corridor_violations
        ));
        out
    }

    /// Power timeline as CSV: `time,watts,lower,upper`.
    pub fn power_csv(&self) -> String {
        let mut out = String::from("time,watts,lower,upper\n");
        for p in &self.power_timeline {
            let (lo, hi) = match p.corridor {
                Some((lo, hi)) => (lo.to_string(), hi.to_string()),
                None => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.time.as_secs_f64(),
                p.watts,
                lo,
                hi
            ));
        }
        out
    }
}
