//! Deterministic discrete-event simulator for batch scheduling of rigid
//! and malleable jobs on an HPC cluster.
//!
//! The simulator replays a workload (job specs plus submission and power
//! corridor schedules) under a pluggable scheduling strategy and emits a
//! complete event trace. Identical inputs produce byte-identical traces.
//!
//! Strategies: EASY backfilling (`backfill`), performance-aware malleable
//! scheduling ordered by MTCT ratio (`perf-aware`), the start-time ordered
//! baseline (`fpsma`), and corridor-driven power management
//! (`power-aware`, `power-aware-running-only`).

pub mod adapt;
pub mod cluster;
pub mod engine;
pub mod job;
pub mod metrics;
pub mod perf;
pub mod power_lp;
pub mod strategy;
pub mod time;
pub mod trace;
pub mod workload;
