//! Deterministic discrete-event loop.
//!
//! The engine owns the virtual clock and event queue, dispatches events in
//! (time, seq) order, invokes the active strategy exactly once per event and
//! applies its decision. The full trace is a pure function of
//! (config, workload).

use crate::adapt::{classify, latency, AdaptOp, Reallocation};
use crate::cluster::ClusterState;
use crate::job::{Job, JobId, JobKind, JobQueues, JobState};
use crate::perf::PerfModel;
use crate::strategy::{
    make_strategy, PendingView, RunningView, SchedSnapshot, ScheduleDecision, Strategy,
    UnknownStrategy,
};
use crate::time::SimTime;
use crate::trace::{AllocEntry, LaunchRecord, SimTrace, TraceRecord};
use crate::workload::{Workload, WorkloadError};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use thiserror::Error;

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    JobSubmitted { job: JobId },
    SchedulerTick,
    JobCompleted { job: JobId, gen: u64 },
    AdaptationCompleted { job: JobId },
    CorridorChanged { lower: f64, upper: f64 },
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCondition {
    AllJobsDone,
    TimeLimit(SimTime),
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub scheduler_tick: SimTime,
    pub strategy: String,
    pub rng_seed: u64,
    pub total_nodes: u32,
    pub end_condition: EndCondition,
    pub p_idle: f64,
}

impl SimConfig {
    pub fn new(strategy: &str, total_nodes: u32) -> Self {
        SimConfig {
            scheduler_tick: SimTime::from_secs(30),
            strategy: strategy.to_string(),
            rng_seed: 1,
            total_nodes,
            end_condition: EndCondition::AllJobsDone,
            p_idle: crate::workload::P_IDLE_WATTS,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.scheduler_tick <= SimTime::ZERO {
            return Err(SimError::Config("scheduler_tick must be > 0".into()));
        }
        if self.total_nodes == 0 {
            return Err(SimError::Config("total_nodes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Error, Debug)]
pub enum SimError {
    #[error(transparent)]
    UnknownStrategy(#[from] UnknownStrategy),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{job} is unschedulable: requests {requested} nodes, cluster has {total}")]
    Unschedulable {
        job: JobId,
        requested: u32,
        total: u32,
    },
    #[error("{job} rejected at submission: {reason}")]
    InvalidJob { job: JobId, reason: String },
    #[error("event scheduled in the past: {at:?} < clock {clock:?}")]
    EventInPast { at: SimTime, clock: SimTime },
    #[error("protocol violation: {0}")]
    Protocol(String),
}

#[derive(Clone, Debug)]
struct QueuedEvent {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

// Ordering is by (time, seq) only; seq is unique, so this is total.
impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for QueuedEvent {}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-heap of events ordered by (time, seq); seq gives FIFO tie-break.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<QueuedEvent>>,
    next_seq: u64,
    clock: SimTime,
}

impl EventQueue {
    pub fn clock(&self) -> SimTime {
        self.clock
    }

    /// Inserts an event, preserving (time, seq) order. Scheduling into the
    /// past signals a protocol bug and is a hard error.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<(), SimError> {
        if time < self.clock {
            return Err(SimError::EventInPast {
                at: time,
                clock: self.clock,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(QueuedEvent { time, seq, kind }));
        Ok(())
    }

    fn pop(&mut self) -> Option<QueuedEvent> {
        let ev = self.heap.pop()?.0;
        debug_assert!(ev.time >= self.clock);
        self.clock = ev.time;
        Some(ev)
    }
}

struct Engine {
    config: SimConfig,
    model: PerfModel,
    strategy: Box<dyn Strategy>,
    jobs: BTreeMap<JobId, Job>,
    queues: JobQueues,
    cluster: ClusterState,
    queue: EventQueue,
    corridor_schedule: Vec<crate::workload::CorridorPhase>,
    active_corridor: Option<(f64, f64)>,
    records: Vec<TraceRecord>,
}

/// Runs one simulation to completion and returns the full trace.
pub fn run(config: &SimConfig, workload: &Workload) -> Result<SimTrace, SimError> {
    config.validate()?;
    workload.validate()?;
    let strategy = make_strategy(&config.strategy)?;

    let mut jobs = BTreeMap::new();
    for (rank, entry) in workload.submit_schedule.iter().enumerate() {
        let spec = workload
            .jobs
            .iter()
            .find(|j| j.id == entry.job)
            .expect("validated schedule")
            .clone();
        jobs.insert(spec.id, Job::new(spec, rank as u32 + 1));
    }

    let mut engine = Engine {
        config: config.clone(),
        model: PerfModel::new(config.rng_seed),
        strategy,
        jobs,
        queues: JobQueues::default(),
        cluster: ClusterState::new(config.total_nodes),
        queue: EventQueue::default(),
        corridor_schedule: workload.corridor_schedule.clone(),
        active_corridor: None,
        records: Vec::new(),
    };
    engine.records.push(TraceRecord::Meta {
        strategy: engine.strategy.id().to_string(),
        seed: config.rng_seed,
        total_nodes: config.total_nodes,
        scheduler_tick: config.scheduler_tick,
        p_idle: config.p_idle,
        workload_hash: workload.hash(),
    });

    for entry in &workload.submit_schedule {
        engine
            .queue
            .schedule(entry.time, EventKind::JobSubmitted { job: entry.job })?;
    }
    for phase in &workload.corridor_schedule {
        engine.queue.schedule(
            phase.time,
            EventKind::CorridorChanged {
                lower: phase.lower,
                upper: phase.upper,
            },
        )?;
    }
    engine
        .queue
        .schedule(config.scheduler_tick, EventKind::SchedulerTick)?;

    engine.run_loop()?;
    Ok(SimTrace {
        records: engine.records,
    })
}

impl Engine {
    /// Hard safety cap against stuck schedules: generous multiple of the
    /// total serialized work.
    fn time_cap(&self) -> SimTime {
        let total_work: i64 = self
            .jobs
            .values()
            .map(|j| j.spec.static_exec_time.as_millis())
            .sum();
        let last_submit = self
            .jobs
            .values()
            .map(|j| j.spec.submit_time)
            .max()
            .unwrap_or(SimTime::ZERO);
        last_submit + SimTime::from_millis(total_work.saturating_mul(100) + 3_600_000)
    }

    fn run_loop(&mut self) -> Result<(), SimError> {
        let cap = match self.config.end_condition {
            EndCondition::TimeLimit(t) => t,
            EndCondition::AllJobsDone => self.time_cap(),
        };
        while let Some(ev) = self.queue.pop() {
            // Drop stale completions invalidated by a reallocation.
            if let EventKind::JobCompleted { job, gen } = &ev.kind {
                if self.jobs[job].completion_gen != *gen {
                    continue;
                }
            }
            if ev.time > cap {
                break;
            }
            self.advance_progress(ev.time);
            self.records.push(TraceRecord::Dispatch {
                time: ev.time,
                seq: ev.seq,
                kind: ev.kind.clone(),
            });
            self.handle(&ev)?;

            let snapshot = self.snapshot(ev.time);
            let decision = self.strategy.decide(&snapshot);
            self.apply(ev.time, decision)?;
            self.record_state(ev.time);

            if self.all_done() {
                break;
            }
        }
        let complete = self.all_done();
        let end_time = self.queue.clock();
        let mut finals: Vec<TraceRecord> = Vec::new();
        for job in self.jobs.values() {
            finals.push(TraceRecord::Job {
                job: job.id(),
                submit: job.spec.submit_time,
                start: job.start_time,
                end: job.end_time,
                adaptations: job.adaptation_count,
            });
        }
        self.records.extend(finals);
        self.records.push(TraceRecord::End {
            time: end_time,
            complete,
        });
        Ok(())
    }

    fn all_done(&self) -> bool {
        self.jobs.values().all(|j| j.state == JobState::Completed)
    }

    /// Accrues effective work for running jobs up to `now`. Adapting jobs
    /// make no progress.
    fn advance_progress(&mut self, now: SimTime) {
        let model = self.model;
        for job in self.jobs.values_mut() {
            if job.state == JobState::Running {
                let dt = (now - job.last_progress).as_secs_f64();
                if dt > 0.0 {
                    let rate = model.effective_rate(&job.spec.perf, job.spec.id, job.allocated_count());
                    job.work_done += rate * dt;
                }
            }
            if job.state == JobState::Running || job.state == JobState::Adapting {
                job.last_progress = now;
            }
        }
    }

    fn schedule_completion(&mut self, id: JobId, now: SimTime) -> Result<(), SimError> {
        let (at, gen) = {
            let job = self.jobs.get_mut(&id).expect("known job");
            debug_assert_eq!(job.state, JobState::Running);
            let rate = self
                .model
                .effective_rate(&job.spec.perf, id, job.allocated_count());
            let remaining = (job.work_total - job.work_done).max(0.0);
            let dt_ms = ((remaining / rate) * 1000.0).ceil() as i64;
            job.completion_gen += 1;
            let at = now + SimTime::from_millis(dt_ms);
            job.scheduled_completion = Some(at);
            (at, job.completion_gen)
        };
        self.queue.schedule(at, EventKind::JobCompleted { job: id, gen })
    }

    fn handle(&mut self, ev: &QueuedEvent) -> Result<(), SimError> {
        match &ev.kind {
            EventKind::JobSubmitted { job } => self.handle_submit(*job),
            EventKind::SchedulerTick => {
                self.queue
                    .schedule(ev.time + self.config.scheduler_tick, EventKind::SchedulerTick)
            }
            EventKind::JobCompleted { job, .. } => self.handle_completion(*job, ev.time),
            EventKind::AdaptationCompleted { job } => self.handle_adaptation_done(*job, ev.time),
            EventKind::CorridorChanged { lower, upper } => {
                self.active_corridor = Some((*lower, *upper));
                Ok(())
            }
        }
    }

    fn handle_submit(&mut self, id: JobId) -> Result<(), SimError> {
        let job = self.jobs.get_mut(&id).expect("known job");
        debug_assert_eq!(job.state, JobState::Pending);
        job.spec
            .validate()
            .map_err(|reason| SimError::InvalidJob { job: id, reason })?;
        if job.spec.nodes > self.config.total_nodes {
            return Err(SimError::Unschedulable {
                job: id,
                requested: job.spec.nodes,
                total: self.config.total_nodes,
            });
        }
        let kind = job.kind;
        self.queues.enqueue(id, kind);
        Ok(())
    }

    fn handle_completion(&mut self, id: JobId, now: SimTime) -> Result<(), SimError> {
        let job = self.jobs.get_mut(&id).expect("known job");
        if job.state != JobState::Running {
            return Err(SimError::Protocol(format!(
                "completion dispatched for {id} in state {:?}",
                job.state
            )));
        }
        job.state = JobState::Completed;
        job.work_done = job.work_total;
        job.end_time = Some(now);
        job.scheduled_completion = None;
        let nodes = std::mem::take(&mut job.allocated);
        self.cluster.release(&nodes);
        Ok(())
    }

    fn handle_adaptation_done(&mut self, id: JobId, now: SimTime) -> Result<(), SimError> {
        let released = {
            let job = self.jobs.get_mut(&id).expect("known job");
            if job.state != JobState::Adapting {
                return Err(SimError::Protocol(format!(
                    "adaptation completion for {id} in state {:?}",
                    job.state
                )));
            }
            let realloc = job
                .pending_realloc
                .take()
                .ok_or_else(|| SimError::Protocol(format!("{id}: completion without begin")))?;
            debug_assert_eq!(realloc.complete_time, now);
            let released: Vec<u32> = realloc
                .from_nodes
                .difference(&realloc.to_nodes)
                .copied()
                .collect();
            job.allocated = realloc.to_nodes;
            job.state = JobState::Running;
            job.adaptation_count += 1;
            job.last_progress = now;
            released
        };
        self.cluster.release(&released.into_iter().collect());
        self.schedule_completion(id, now)
    }

    /// Corridor the strategy steers toward: the phase active at `now`, or
    /// the first upcoming phase during startup so admission control already
    /// respects it.
    fn strategy_corridor(&self, now: SimTime) -> Option<(f64, f64)> {
        if self.corridor_schedule.is_empty() {
            return None;
        }
        let active = self
            .corridor_schedule
            .iter()
            .rev()
            .find(|p| p.time <= now)
            .unwrap_or(&self.corridor_schedule[0]);
        Some((active.lower, active.upper))
    }

    /// Node count a job draws power on. During an adaptation window the
    /// process set already matches the target: expansion launches processes
    /// at window start and shrink tears them down at window start, even
    /// though released nodes stay owned until completion.
    fn power_node_count(job: &Job) -> u32 {
        match &job.pending_realloc {
            Some(r) => r.to_nodes.len() as u32,
            None => job.allocated_count(),
        }
    }

    fn job_power(&self, job: &Job) -> f64 {
        self.model.power_draw(
            &job.spec.perf,
            job.id(),
            Self::power_node_count(job),
            job.spec.pmin_per_node,
            job.spec.pmax_per_node,
        )
    }

    fn system_power(&self) -> f64 {
        let jobs: f64 = self
            .jobs
            .values()
            .filter(|j| matches!(j.state, JobState::Running | JobState::Adapting))
            .map(|j| self.job_power(j))
            .sum();
        jobs + self.cluster.idle_count() as f64 * self.config.p_idle
    }

    fn snapshot(&self, now: SimTime) -> SchedSnapshot {
        let mut pending: Vec<PendingView> = self
            .queues
            .rigid
            .iter()
            .chain(self.queues.elastic.iter())
            .map(|id| {
                let j = &self.jobs[id];
                PendingView {
                    id: *id,
                    kind: j.kind,
                    nodes_requested: j.spec.nodes,
                    priority: j.priority,
                    runtime_estimate: j.spec.static_exec_time,
                    pmin_per_node: j.spec.pmin_per_node,
                    pmax_per_node: j.spec.pmax_per_node,
                }
            })
            .collect();
        pending.sort_by_key(|p| p.priority);

        let mut running: Vec<RunningView> = self
            .jobs
            .values()
            .filter(|j| matches!(j.state, JobState::Running | JobState::Adapting))
            .map(|j| RunningView {
                id: j.id(),
                kind: j.kind,
                priority: j.priority,
                start_time: j.start_time.expect("running job started"),
                allocated: j.allocated.clone(),
                launcher: j.launcher.expect("running job has launcher"),
                valid_set: j.valid_set.clone(),
                mtct: self.model.mtct(&j.spec.perf, j.id(), j.allocated_count()),
                power_total: self.job_power(j),
                pmin_per_node: j.spec.pmin_per_node,
                pmax_per_node: j.spec.pmax_per_node,
                adapting: j.state == JobState::Adapting,
                completion_time: j.scheduled_completion,
            })
            .collect();
        running.sort_by_key(|r| r.priority);

        SchedSnapshot {
            now,
            total_nodes: self.config.total_nodes,
            idle: self.cluster.idle.clone(),
            pending,
            running,
            corridor: self.strategy_corridor(now),
            p_idle: self.config.p_idle,
            system_power: self.system_power(),
        }
    }

    fn apply(&mut self, now: SimTime, decision: ScheduleDecision) -> Result<(), SimError> {
        let mut launch_records = Vec::new();
        let mut realloc_records = Vec::new();

        for req in decision.reallocations {
            let realloc = {
                let job = self.jobs.get_mut(&req.job).expect("known job");
                if job.state != JobState::Running || job.kind != JobKind::Malleable {
                    return Err(SimError::Protocol(format!(
                        "reallocation of {} in state {:?}",
                        req.job, job.state
                    )));
                }
                let launcher = job.launcher.expect("running job has launcher");
                let op = classify(req.job, launcher, &job.allocated, &req.target, &job.valid_set)
                    .map_err(|e| SimError::Protocol(e.to_string()))?;
                let complete_time = now + latency(op, req.target.len() as u32);
                Reallocation {
                    job: req.job,
                    op,
                    from_nodes: job.allocated.clone(),
                    to_nodes: req.target,
                    issue_time: now,
                    complete_time,
                }
            };
            if realloc.op == AdaptOp::Expand {
                // expansion nodes are claimed at begin, not at complete
                let added: std::collections::BTreeSet<u32> = realloc
                    .to_nodes
                    .difference(&realloc.from_nodes)
                    .copied()
                    .collect();
                self.cluster
                    .claim(&added)
                    .map_err(|n| SimError::Protocol(format!("node {n} not idle for expansion")))?;
            }
            {
                let job = self.jobs.get_mut(&req.job).expect("known job");
                if realloc.op == AdaptOp::Expand {
                    job.allocated = realloc.to_nodes.clone();
                }
                job.state = JobState::Adapting;
                // invalidate the in-flight completion; a job never completes
                // while adapting
                job.completion_gen += 1;
                job.scheduled_completion = None;
                job.pending_realloc = Some(realloc.clone());
            }
            self.queue.schedule(
                realloc.complete_time,
                EventKind::AdaptationCompleted { job: req.job },
            )?;
            realloc_records.push(realloc);
        }

        for launch in decision.launches {
            let id = launch.job;
            {
                let job = self.jobs.get_mut(&id).expect("known job");
                if job.state != JobState::Pending {
                    return Err(SimError::Protocol(format!(
                        "launch of {id} in state {:?}",
                        job.state
                    )));
                }
                if launch.nodes.len() as u32 != job.spec.nodes {
                    return Err(SimError::Protocol(format!(
                        "launch of {id} with {} nodes, requested {}",
                        launch.nodes.len(),
                        job.spec.nodes
                    )));
                }
            }
            self.cluster
                .claim(&launch.nodes)
                .map_err(|n| SimError::Protocol(format!("node {n} not idle for launch")))?;
            self.queues.remove(id);
            let launcher = *launch.nodes.iter().next().expect("non-empty launch set");
            {
                let job = self.jobs.get_mut(&id).expect("known job");
                job.state = JobState::Running;
                job.allocated = launch.nodes.clone();
                job.launcher = Some(launcher);
                job.start_time = Some(now);
                job.last_progress = now;
                job.work_total = self.model.work_total(
                    &job.spec.perf,
                    id,
                    job.spec.nodes,
                    job.spec.static_exec_time.as_secs_f64(),
                );
                job.work_done = 0.0;
            }
            self.schedule_completion(id, now)?;
            launch_records.push(LaunchRecord {
                job: id,
                launcher,
                nodes: launch.nodes,
            });
        }

        self.records.push(TraceRecord::Decision {
            time: now,
            launches: launch_records,
            reallocations: realloc_records,
        });
        Ok(())
    }

    fn record_state(&mut self, now: SimTime) {
        let allocations: Vec<AllocEntry> = self
            .jobs
            .values()
            .filter(|j| matches!(j.state, JobState::Running | JobState::Adapting))
            .map(|j| AllocEntry {
                job: j.id(),
                launcher: j.launcher.expect("allocated job has launcher"),
                nodes: j.allocated.clone(),
            })
            .collect();
        let adapting: Vec<JobId> = self
            .jobs
            .values()
            .filter(|j| j.state == JobState::Adapting)
            .map(|j| j.id())
            .collect();
        self.records.push(TraceRecord::Snapshot {
            time: now,
            allocations,
            adapting,
            power: self.system_power(),
            corridor: self.active_corridor,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    #[test]
    fn queue_orders_by_time_then_fifo() {
        let mut q = EventQueue::default();
        q.schedule(SimTime::from_secs(5), EventKind::SchedulerTick).unwrap();
        q.schedule(SimTime::from_secs(3), EventKind::SchedulerTick).unwrap();
        q.schedule(
            SimTime::from_secs(7),
            EventKind::JobSubmitted { job: JobId(1) },
        )
        .unwrap();
        q.schedule(
            SimTime::from_secs(7),
            EventKind::JobSubmitted { job: JobId(2) },
        )
        .unwrap();
        assert_eq!(q.pop().unwrap().time, SimTime::from_secs(3));
        assert_eq!(q.pop().unwrap().time, SimTime::from_secs(5));
        let a = q.pop().unwrap();
        let b = q.pop().unwrap();
        assert_eq!(a.kind, EventKind::JobSubmitted { job: JobId(1) });
        assert_eq!(b.kind, EventKind::JobSubmitted { job: JobId(2) });
    }

    #[test]
    fn queue_rejects_events_in_the_past() {
        let mut q = EventQueue::default();
        q.schedule(SimTime::from_secs(3), EventKind::SchedulerTick).unwrap();
        q.pop().unwrap();
        // at the clock is fine
        q.schedule(SimTime::from_secs(3), EventKind::SchedulerTick).unwrap();
        assert!(matches!(
            q.schedule(SimTime::from_secs(2), EventKind::SchedulerTick),
            Err(SimError::EventInPast { .. })
        ));
    }
}
